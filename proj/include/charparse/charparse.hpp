#pragma once

#include "charparse/chartransform.hpp"
#include "charparse/decoder.hpp"
#include "charparse/error.hpp"
#include "charparse/eval.hpp"
#include "charparse/features.hpp"
#include "charparse/losses.hpp"
#include "charparse/parallel.hpp"
#include "charparse/random.hpp"
#include "charparse/score_file.hpp"
#include "charparse/scorer.hpp"
#include "charparse/scores.hpp"
#include "charparse/synth.hpp"
#include "charparse/trainer.hpp"
#include "charparse/treebank.hpp"
#include "charparse/utf8.hpp"
