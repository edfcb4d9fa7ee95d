#pragma once

#include "hateharness/corpus.hpp"
#include "hateharness/deploy.hpp"
#include "hateharness/encoder.hpp"
#include "hateharness/eval.hpp"
#include "hateharness/finetune.hpp"
#include "hateharness/fixtures.hpp"
#include "hateharness/preprocess.hpp"
#include "hateharness/runner.hpp"
