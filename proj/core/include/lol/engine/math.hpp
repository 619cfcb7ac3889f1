#pragma once

#include <span>
#include <vector>

#include "lol/common.hpp"

namespace lol::engine {

// log(sum(exp(x))) with max-subtraction. Throws on non-finite input.
double logsumexp(std::span<const double> x);

// x - logsumexp(x). Throws ValidationError on non-finite input.
std::vector<double> log_softmax(std::span<const double> raw);

std::vector<double> softmax(std::span<const double> raw);

// Index of the maximum; the lowest index wins ties.
TokenId argmax(std::span<const double> values);

}  // namespace lol::engine
