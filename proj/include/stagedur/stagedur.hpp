#pragma once

#include "stagedur/errors.hpp"
#include "stagedur/model.hpp"
#include "stagedur/history.hpp"
#include "stagedur/strategy.hpp"
#include "stagedur/epoch.hpp"
#include "stagedur/markov_chain.hpp"
#include "stagedur/mimic.hpp"
#include "stagedur/evaluate.hpp"
#include "stagedur/verify.hpp"
#include "stagedur/io.hpp"
