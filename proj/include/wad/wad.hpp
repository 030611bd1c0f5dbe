#pragma once

#include "wad/annotation.hpp"
#include "wad/curriculum.hpp"
#include "wad/dataset.hpp"
#include "wad/diagnostics.hpp"
#include "wad/error.hpp"
#include "wad/io.hpp"
#include "wad/pseudo_labeling.hpp"
#include "wad/repr_core.hpp"
#include "wad/student.hpp"
#include "wad/synth_data.hpp"
#include "wad/weighting.hpp"
