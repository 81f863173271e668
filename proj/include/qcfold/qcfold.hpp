#pragma once

#include "profiles.hpp"
#include "wedge_surface.hpp"
#include "qc_verify.hpp"
#include "cylinder_map.hpp"
#include "calibration.hpp"
#include "cover.hpp"
#include "measure.hpp"
#include "io.hpp"
