#pragma once

#include "advray/attack.hpp"
#include "advray/bvh.hpp"
#include "advray/core.hpp"
#include "advray/detect.hpp"
#include "advray/diff.hpp"
#include "advray/image.hpp"
#include "advray/io.hpp"
#include "advray/mesh.hpp"
#include "advray/raytrace.hpp"
#include "advray/scene.hpp"
#include "advray/scenecfg.hpp"
#include "advray/victim.hpp"
