#pragma once

#include "bedrr/bench.hpp"
#include "bedrr/error.hpp"
#include "bedrr/evaluate.hpp"
#include "bedrr/features.hpp"
#include "bedrr/io.hpp"
#include "bedrr/mlp.hpp"
#include "bedrr/model.hpp"
#include "bedrr/optim.hpp"
#include "bedrr/rnn.hpp"
#include "bedrr/rr.hpp"
#include "bedrr/signal.hpp"
#include "bedrr/stream.hpp"
#include "bedrr/svm.hpp"
#include "bedrr/synth.hpp"
#include "bedrr/tcp.hpp"
#include "bedrr/train.hpp"
