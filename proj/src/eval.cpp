#include "prefcf/eval.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>

#include "prefcf/error.hpp"

namespace prefcf {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

struct RefRow {
  std::string_view dataset;
  std::size_t train_users;
  std::string_view model;
  std::array<double, 3> mae;  // 5, 10, 20 given
};

constexpr RefRow kReference[] = {
    {"movierating", 100, "pcc", {0.881, 0.832, 0.809}},
    {"movierating", 100, "vs", {0.859, 0.834, 0.823}},
    {"movierating", 100, "pd", {0.839, 0.826, 0.818}},
    {"movierating", 100, "am", {0.882, 0.856, 0.836}},
    {"movierating", 100, "bc", {0.968, 0.946, 0.941}},
    {"movierating", 100, "dm", {0.814, 0.810, 0.799}},
    {"movierating", 100, "mp", {0.911, 0.905, 0.880}},
    {"movierating", 100, "baseline", {0.823, 0.822, 0.817}},
    {"movierating", 200, "pcc", {0.878, 0.828, 0.801}},
    {"movierating", 200, "vs", {0.862, 0.950, 0.854}},
    {"movierating", 200, "pd", {0.835, 0.816, 0.806}},
    {"movierating", 200, "am", {0.891, 0.850, 0.818}},
    {"movierating", 200, "bc", {0.949, 0.942, 0.912}},
    {"movierating", 200, "dm", {0.790, 0.777, 0.761}},
    {"movierating", 200, "mp", {0.877, 0.861, 0.837}},
    {"movierating", 200, "baseline", {0.804, 0.801, 0.799}},
    {"eachmovie", 200, "pcc", {1.22, 1.16, 1.13}},
    {"eachmovie", 200, "vs", {1.25, 1.24, 1.26}},
    {"eachmovie", 200, "pd", {1.19, 1.16, 1.15}},
    {"eachmovie", 200, "am", {1.27, 1.18, 1.14}},
    {"eachmovie", 200, "bc", {1.25, 1.22, 1.17}},
    {"eachmovie", 200, "dm", {1.07, 1.04, 1.03}},
    {"eachmovie", 200, "mp", {1.12, 1.09, 1.09}},
    {"eachmovie", 200, "baseline", {1.08, 1.06, 1.05}},
    {"eachmovie", 400, "pcc", {1.22, 1.16, 1.13}},
    {"eachmovie", 400, "vs", {1.32, 1.33, 1.37}},
    {"eachmovie", 400, "pd", {1.18, 1.16, 1.15}},
    {"eachmovie", 400, "am", {1.28, 1.19, 1.16}},
    {"eachmovie", 400, "bc", {1.17, 1.15, 1.14}},
    {"eachmovie", 400, "dm", {1.05, 1.03, 1.02}},
    {"eachmovie", 400, "mp", {1.10, 1.08, 1.07}},
    {"eachmovie", 400, "baseline", {1.06, 1.05, 1.04}},
};

}  // namespace

double mae(std::span<const PredictionRecord> records) {
  if (records.empty()) throw UndefinedMetricError("MAE of an empty prediction set");
  double s = 0.0;
  for (const auto& r : records) s += std::abs(r.predicted - r.actual);
  return s / static_cast<double>(records.size());
}

double abstention_fallback(std::span<const ItemRating> observed, int scale) {
  if (observed.empty()) return (1.0 + scale) / 2.0;
  return std::clamp(mean_rating(observed), 1.0, static_cast<double>(scale));
}

std::vector<PredictionRecord> predict_heldout(const Recommender& rec, const SplitResult& split) {
  std::vector<PredictionRecord> out;
  const int scale = split.test_heldout.scale();
  for (const UserId u : split.test_users) {
    const auto observed = split.test_observed.ratings_in_order(u);
    const auto scorer = rec.for_user(observed);
    const double fallback = abstention_fallback(observed, scale);
    for (const auto& h : split.test_heldout.ratings_in_order(u)) {
      const auto p = scorer(h.item);
      out.push_back({u, h.item, p ? *p : fallback, h.rating, !p.has_value()});
    }
  }
  return out;
}

EvalReport run_protocol(const RatingTable& table, const ProtocolConfig& config) {
  config.model.validate();
  if (config.models.empty()) throw ConfigError("no models to evaluate");
  if (config.given_counts.empty() || config.train_sizes.empty())
    throw ConfigError("train sizes and given counts must be non-empty");
  for (auto n : config.train_sizes)
    if (n >= table.num_users())
      throw ProtocolError("train size " + std::to_string(n) + " is not below the user count " +
                          std::to_string(table.num_users()));

  using clock = std::chrono::steady_clock;
  EvalReport report{config.dataset_name, {}};
  for (const auto n : config.train_sizes) {
    std::vector<SplitResult> splits;
    for (const auto g : config.given_counts)
      splits.push_back(split(table, SplitProtocol{n, g, config.selection, config.seed}));
    for (const auto kind : config.models) {
      std::optional<Recommender> rec;
      std::string train_error;
      const auto t0 = clock::now();
      try {
        rec.emplace(kind, splits.front().train, config.model, config.seed);
      } catch (const Error& e) {
        train_error = e.what();
      }
      const double train_seconds = std::chrono::duration<double>(clock::now() - t0).count();
      for (std::size_t gi = 0; gi < config.given_counts.size(); ++gi) {
        EvalRow row;
        row.model = std::string(model_kind_name(kind));
        row.train_users = n;
        row.given = config.given_counts[gi];
        row.error = train_error;
        const auto t1 = clock::now();
        if (rec) {
          try {
            const auto records = predict_heldout(*rec, splits[gi]);
            row.n_pred = records.size();
            for (const auto& r : records) row.n_abstain += r.abstained;
            if (!records.empty()) row.mae = mae(records);
          } catch (const Error& e) {
            row.error = e.what();
          }
        }
        row.seconds = train_seconds + std::chrono::duration<double>(clock::now() - t1).count();
        report.rows.push_back(std::move(row));
      }
    }
  }
  return report;
}

bool has_reference_column(std::string_view dataset) {
  const auto d = lower(dataset);
  return d == "movierating" || d == "eachmovie";
}

std::optional<ReferenceValue> reference_mae(std::string_view dataset, std::string_view model,
                                            std::size_t train_users, std::size_t given) {
  const auto d = lower(dataset);
  std::size_t col;
  switch (given) {
    case 5: col = 0; break;
    case 10: col = 1; break;
    case 20: col = 2; break;
    default: return std::nullopt;
  }
  for (const auto& r : kReference)
    if (r.dataset == d && r.model == model && r.train_users == train_users)
      return ReferenceValue{r.mae[col], d == "movierating" ? 3 : 2};
  return std::nullopt;
}

void render_report(const EvalReport& report, std::ostream& out, RenderOptions options) {
  const bool ref = has_reference_column(report.dataset);
  out << "model\ttrain_users\tgiven\tmae\tn_pred\tn_abstain\tseconds";
  if (ref) out << "\treference";
  out << '\n';
  for (const auto& r : report.rows) {
    out << r.model << '\t' << r.train_users << '\t' << r.given << '\t';
    if (!r.error.empty())
      out << "failed";
    else if (r.mae)
      out << fixed(*r.mae, 4);
    else
      out << "NA";
    out << '\t' << r.n_pred << '\t' << r.n_abstain << '\t'
        << (options.timing ? fixed(r.seconds, 3) : std::string("NA"));
    if (ref) {
      const auto v = reference_mae(report.dataset, r.model, r.train_users, r.given);
      out << '\t' << (v ? fixed(v->mae, v->decimals) : std::string("-"));
    }
    out << '\n';
  }
  if (!out) throw IoError("could not write the report");
}

}  // namespace prefcf
