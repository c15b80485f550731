#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace planar_mk {

/// Real values on an nx-by-ny cell grid, stored row-major (x index outer).
class GridField
{
public:
  GridField() = default;

  GridField(std::size_t nx, std::size_t ny, double fill = 0.0)
    : nx_(nx), ny_(ny), data_(nx * ny, fill)
  {
  }

  GridField(std::size_t nx, std::size_t ny, std::vector<double> data)
    : nx_(nx), ny_(ny), data_(std::move(data))
  {
    assert(data_.size() == nx_ * ny_);
  }

  std::size_t nx() const noexcept { return nx_; }
  std::size_t ny() const noexcept { return ny_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * ny_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * ny_ + j]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::span<const double> row(std::size_t i) const noexcept
  {
    return std::span<const double>(data_).subspan(i * ny_, ny_);
  }

  bool operator==(const GridField&) const = default;

private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<double> data_;
};

} // namespace planar_mk
