#pragma once

#include "planar_mk/errors.hpp"
#include "planar_mk/grid_field.hpp"
#include "planar_mk/measures.hpp"
#include "planar_mk/density_io.hpp"
#include "planar_mk/rng.hpp"
#include "planar_mk/coupling.hpp"
#include "planar_mk/reduced_functional.hpp"
#include "planar_mk/reduction.hpp"
#include "planar_mk/variational.hpp"
#include "planar_mk/lemmas.hpp"
#include "planar_mk/optimizer.hpp"
#include "planar_mk/oracle.hpp"
#include "planar_mk/report.hpp"
