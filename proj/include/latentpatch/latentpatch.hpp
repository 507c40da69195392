#pragma once

#include "errors.hpp"
#include "grid.hpp"
#include "npy.hpp"
#include "provenance.hpp"
#include "pca.hpp"
#include "rng.hpp"
#include "source_set.hpp"
#include "patch_index.hpp"
#include "synthesizer.hpp"
#include "conditioning.hpp"
#include "metrics.hpp"
