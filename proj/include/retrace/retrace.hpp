// Copyright (c) 2026 The retrace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "retrace/adam.hpp"
#include "retrace/atlas.hpp"
#include "retrace/brdf.hpp"
#include "retrace/bvh.hpp"
#include "retrace/camera.hpp"
#include "retrace/envmap.hpp"
#include "retrace/evalmetrics.hpp"
#include "retrace/fixture.hpp"
#include "retrace/grad.hpp"
#include "retrace/gradients.hpp"
#include "retrace/image.hpp"
#include "retrace/io_exr.hpp"
#include "retrace/io_hdr.hpp"
#include "retrace/io_png.hpp"
#include "retrace/loss.hpp"
#include "retrace/maps.hpp"
#include "retrace/math.hpp"
#include "retrace/mesh.hpp"
#include "retrace/optimize.hpp"
#include "retrace/parallel.hpp"
#include "retrace/render.hpp"
#include "retrace/rng.hpp"
#include "retrace/scene.hpp"
