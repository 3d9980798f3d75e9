#pragma once

// Umbrella header.

#include "den/common.hpp"
#include "den/dataset.hpp"
#include "den/disparity.hpp"
#include "den/distance.hpp"
#include "den/io.hpp"
#include "den/stats.hpp"
#include "den/synth.hpp"
#include "den/version.hpp"
