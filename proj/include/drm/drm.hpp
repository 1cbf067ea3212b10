#pragma once

#include "drm/analysis.hpp"
#include "drm/bounds.hpp"
#include "drm/common.hpp"
#include "drm/geometry.hpp"
#include "drm/io.hpp"
#include "drm/network.hpp"
#include "drm/problem.hpp"
#include "drm/problems.hpp"
#include "drm/ritz.hpp"
#include "drm/rng.hpp"
#include "drm/train.hpp"
