#pragma once

#include "splinecal/calib_params.hpp"
#include "splinecal/data_io.hpp"
#include "splinecal/errors.hpp"
#include "splinecal/estimator.hpp"
#include "splinecal/initializer.hpp"
#include "splinecal/lie.hpp"
#include "splinecal/sensor_models.hpp"
#include "splinecal/simulator.hpp"
#include "splinecal/spline.hpp"
#include "splinecal/vision.hpp"
