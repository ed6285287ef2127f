#include "prefcf/decision.hpp"

#include <string>

#include "prefcf/error.hpp"

namespace prefcf {

PredictMode parse_predict_mode(std::string_view name) {
  if (name == "expected") return PredictMode::expected;
  if (name == "argmax") return PredictMode::argmax;
  throw ValidationError("unknown prediction mode '" + std::string(name) + "'");
}

std::string_view predict_mode_name(PredictMode mode) {
  return mode == PredictMode::expected ? "expected" : "argmax";
}

double decide(std::span<const double> dist, PredictMode mode) {
  if (dist.empty()) throw ValidationError("empty rating distribution");
  if (mode == PredictMode::expected) {
    double e = 0.0;
    for (std::size_t r = 0; r < dist.size(); ++r) e += static_cast<double>(r + 1) * dist[r];
    return e;
  }
  std::size_t best = 0;
  for (std::size_t r = 1; r < dist.size(); ++r)
    if (dist[r] > dist[best]) best = r;
  return static_cast<double>(best + 1);
}

}  // namespace prefcf
