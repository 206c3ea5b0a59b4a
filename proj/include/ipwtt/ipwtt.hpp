#ifndef IPWTT_IPWTT_HPP
#define IPWTT_IPWTT_HPP

#include "ipwtt/error.hpp"
#include "ipwtt/estimators.hpp"
#include "ipwtt/inference.hpp"
#include "ipwtt/montecarlo.hpp"
#include "ipwtt/normal.hpp"
#include "ipwtt/propensity.hpp"
#include "ipwtt/random.hpp"
#include "ipwtt/roster.hpp"
#include "ipwtt/sample.hpp"
#include "ipwtt/tail_fit.hpp"

#endif  // IPWTT_IPWTT_HPP
