#pragma once

#include "halfsib/experiments.hpp"
#include "halfsib/hsr.hpp"
#include "halfsib/lightcurve.hpp"
#include "halfsib/metrics.hpp"
#include "halfsib/ridge.hpp"
#include "halfsib/scene_config.hpp"
#include "halfsib/select.hpp"
#include "halfsib/spline.hpp"
#include "halfsib/synth.hpp"
