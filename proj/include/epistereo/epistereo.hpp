#pragma once

// Umbrella header.
#include "epistereo/census.hpp"
#include "epistereo/cost_volume.hpp"
#include "epistereo/disparity.hpp"
#include "epistereo/error.hpp"
#include "epistereo/evaluate.hpp"
#include "epistereo/geometry.hpp"
#include "epistereo/hierarchical.hpp"
#include "epistereo/image.hpp"
#include "epistereo/io.hpp"
#include "epistereo/pipeline.hpp"
#include "epistereo/point_cloud.hpp"
#include "epistereo/rectify.hpp"
#include "epistereo/sgm.hpp"
#include "epistereo/spherical.hpp"
#include "epistereo/synth.hpp"
#include "epistereo/triangulate.hpp"
#include "epistereo/warp.hpp"
