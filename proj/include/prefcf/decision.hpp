#pragma once

#include <span>
#include <string_view>

namespace prefcf {

// How a distribution over ratings 1..R becomes a point prediction.
enum class PredictMode { expected, argmax };

PredictMode parse_predict_mode(std::string_view name);
std::string_view predict_mode_name(PredictMode mode);

// dist[r - 1] = P(r). Expected mode returns sum r * P(r); argmax returns the most
// probable rating, ties going to the lower rating.
double decide(std::span<const double> dist, PredictMode mode);

}  // namespace prefcf
