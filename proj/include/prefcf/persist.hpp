#pragma once
// Trained models as self-describing JSON documents: kind, dimensions, every
// table in row-major order and the item labels. Doubles round-trip exactly.

#include <filesystem>
#include <iosfwd>

#include "prefcf/recommender.hpp"

namespace prefcf {

void save_model(const TrainedModel& model, std::ostream& out);
TrainedModel load_model(std::istream& in);

void save_model_file(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model_file(const std::filesystem::path& path);

}  // namespace prefcf
