#include "lol/engine/math.hpp"

#include <algorithm>
#include <cmath>

#include "lol/error.hpp"

namespace lol::engine {

namespace {

double checked_max(std::span<const double> x) {
  if (x.empty()) throw ValidationError("cannot normalize an empty score vector");
  double mx = -INFINITY;
  for (double v : x) {
    if (!std::isfinite(v)) throw ValidationError("non-finite score in log_softmax input");
    mx = std::max(mx, v);
  }
  return mx;
}

}  // namespace

double logsumexp(std::span<const double> x) {
  const double mx = checked_max(x);
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

std::vector<double> log_softmax(std::span<const double> raw) {
  // Subtract the maximum before the log-normalizer so large offsets do not
  // cost precision: out = (x - max) - log(sum(exp(x - max))).
  const double mx = checked_max(raw);
  std::vector<double> out(raw.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = raw[i] - mx;
    sum += std::exp(out[i]);
  }
  const double log_sum = std::log(sum);
  for (double& v : out) v -= log_sum;
  return out;
}

std::vector<double> softmax(std::span<const double> raw) {
  auto out = log_softmax(raw);
  for (double& v : out) v = std::exp(v);
  return out;
}

TokenId argmax(std::span<const double> values) {
  if (values.empty()) throw ValidationError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

}  // namespace lol::engine
