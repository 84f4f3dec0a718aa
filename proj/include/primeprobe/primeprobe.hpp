#pragma once

#include "primeprobe/util.hpp"
#include "primeprobe/corpus.hpp"
#include "primeprobe/stimuli.hpp"
#include "primeprobe/kn_model.hpp"
#include "primeprobe/lstm.hpp"
#include "primeprobe/priming.hpp"
#include "primeprobe/stats.hpp"
#include "primeprobe/report.hpp"
#include "primeprobe/pipeline.hpp"
