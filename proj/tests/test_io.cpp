#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "instances.hpp"
#include "planar_mk/density_io.hpp"

using namespace planar_mk;

namespace {

std::string temp_file(const std::string& name, const std::string& text)
{
  auto path = std::filesystem::temp_directory_path() / ("planar_mk_io_" + name);
  std::ofstream(path) << text;
  return path.string();
}

} // namespace

TEST(DensityJson, UniformGridFlatValues)
{
  auto doc = nlohmann::json::parse(R"({"grid_x": {"min": 0, "max": 1, "n": 2},
                                      "grid_y": {"min": 0, "max": 2, "n": 3},
                                      "values": [1, 2, 3, 4, 5, 6]})");
  RawGrid raw = parse_grid_json(doc);
  EXPECT_EQ(raw.values.nx(), 2u);
  EXPECT_EQ(raw.values.ny(), 3u);
  EXPECT_EQ(raw.values(1, 0), 4.0);
  ASSERT_TRUE(raw.grid_y.has_value());
  EXPECT_DOUBLE_EQ(raw.grid_y->width(0), 2.0 / 3.0);
}

TEST(DensityJson, NestedValuesAndEdges)
{
  auto doc = nlohmann::json::parse(R"({"grid_x": {"edges": [0, 0.25, 1]},
                                      "grid_y": {"min": 0, "max": 1, "n": 2},
                                      "values": [[1, 2], [3, 4]]})");
  RawGrid raw = parse_grid_json(doc);
  EXPECT_EQ(raw.values(0, 1), 2.0);
  EXPECT_DOUBLE_EQ(raw.grid_x.width(1), 0.75);
}

TEST(DensityJson, OneDimensional)
{
  auto path = temp_file("1d.json", R"({"grid_x": {"min": 0, "max": 1, "n": 4}, "values": [1, 1, 1, 1]})");
  auto d = read_density_1d(path);
  EXPECT_EQ(d.cells(), 4u);
  EXPECT_NEAR(d.value(2), 1.0, 1e-15);
  EXPECT_THROW(read_density_2d(path), ParseError);
}

TEST(DensityJson, ErrorsNameTheProblem)
{
  auto expect_message = [](const std::string& text, const std::string& fragment) {
    try {
      parse_grid_json(nlohmann::json::parse(text));
      FAIL() << "no exception for " << text;
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  expect_message(R"({"values": [1]})", "grid_x");
  expect_message(R"({"grid_x": {"min": 0, "max": 1, "n": 2}})", "values");
  expect_message(R"({"grid_x": {"min": 0, "n": 2}, "values": [1, 1]})", "max");
  expect_message(R"({"grid_x": {"min": 0, "max": 1, "n": 3}, "values": [1, 1]})", "expected 3");
}

TEST(DensityJson, MalformedFileIsAParseError)
{
  auto path = temp_file("bad.json", "{\"grid_x\": {\"min\": 0,, }");
  EXPECT_THROW(read_density_2d(path), ParseError);
  EXPECT_THROW(read_density_2d("/nonexistent/planar_mk.json"), ParseError);
}

TEST(DensityJson, IngestionRenormalizes)
{
  auto path = temp_file("unnorm.json", R"({"grid_x": {"min": 0, "max": 1, "n": 2},
                                           "grid_y": {"min": 0, "max": 1, "n": 2},
                                           "values": [2, 2, 2, 2]})");
  auto d = read_density_2d(path);
  EXPECT_NEAR(d.value(0, 0), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(d.normalization().raw_mass, 2.0);
}

TEST(DensityCsv, HeaderOnlyInfersUniformGrid)
{
  std::istringstream in("x\\y,0.25,0.75\n0.125,1,2\n0.375,3,4\n0.625,5,6\n0.875,7,8\n");
  RawGrid raw = parse_grid_csv(in);
  EXPECT_EQ(raw.values.nx(), 4u);
  EXPECT_EQ(raw.values.ny(), 2u);
  EXPECT_NEAR(raw.grid_x.lower(), 0.0, 1e-15);
  EXPECT_NEAR(raw.grid_y.value().upper(), 1.0, 1e-15);
  EXPECT_EQ(raw.values(3, 1), 8.0);
}

TEST(DensityCsv, RaggedRowIsRejected)
{
  std::istringstream in("x\\y,0.25,0.75\n0.25,1\n");
  EXPECT_THROW(parse_grid_csv(in), ParseError);
  std::istringstream text("x\\y,0.25,0.75\n0.25,1,abc\n");
  EXPECT_THROW(parse_grid_csv(text), ParseError);
}

TEST(DensityCsv, WriteThenReadRoundTrips)
{
  auto d = planar_mk::testing::random_density(5, 7, 9);
  std::ostringstream out;
  write_grid_csv(out, d.grid_x(), d.grid_y(), d.values());
  std::istringstream in(out.str());
  RawGrid raw = parse_grid_csv(in);
  EXPECT_EQ(raw.grid_x, d.grid_x());
  EXPECT_EQ(*raw.grid_y, d.grid_y());
  EXPECT_EQ(raw.values, d.values());
}

TEST(DensityCsv, SingleCellNeedsTheGridComment)
{
  std::istringstream bare("x\\y,0.5\n0.5,1\n");
  EXPECT_THROW(parse_grid_csv(bare), ParseError);
  std::istringstream with("# grid_x=0,1,1 grid_y=0,1,1\nx\\y,0.5\n0.5,1\n");
  EXPECT_EQ(parse_grid_csv(with).values(0, 0), 1.0);
}

TEST(DensityJson, WriterRoundTrips)
{
  auto d = planar_mk::testing::random_density(3, 4, 1);
  RawGrid raw = parse_grid_json(density_to_json(d));
  EXPECT_EQ(raw.values, d.values());
  EXPECT_EQ(raw.grid_x, d.grid_x());
}
