#pragma once

#include "boxlab/analytics.hpp"
#include "boxlab/box.hpp"
#include "boxlab/cluster.hpp"
#include "boxlab/errors.hpp"
#include "boxlab/fit.hpp"
#include "boxlab/io.hpp"
#include "boxlab/parallel.hpp"
#include "boxlab/rng.hpp"
#include "boxlab/sne.hpp"
#include "boxlab/stats.hpp"
#include "boxlab/svg.hpp"
#include "boxlab/synth.hpp"
#include "boxlab/table.hpp"
