#pragma once

#include "error.hpp"
#include "geometry.hpp"
#include "voxel.hpp"
#include "rng.hpp"
#include "vm.hpp"
#include "world.hpp"
#include "synthesis.hpp"
#include "aesthetics.hpp"
#include "naturalness.hpp"
#include "designer.hpp"
#include "fleet.hpp"
