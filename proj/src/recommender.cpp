#include "prefcf/recommender.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "prefcf/error.hpp"
#include "prefcf/memory_cf.hpp"
#include "prefcf/personality.hpp"

namespace prefcf {
namespace {

constexpr std::array<std::pair<ModelKind, std::string_view>, 8> kNames{{
    {ModelKind::dm, "dm"},
    {ModelKind::baseline, "baseline"},
    {ModelKind::mp, "mp"},
    {ModelKind::am, "am"},
    {ModelKind::bc, "bc"},
    {ModelKind::pd, "pd"},
    {ModelKind::pcc, "pcc"},
    {ModelKind::vs, "vs"},
}};

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  for (const auto& [k, n] : kNames)
    if (k == kind) return n;
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::vector<ModelKind> parse_model_list(std::string_view list) {
  std::vector<ModelKind> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto end = std::min(list.find(',', start), list.size());
    const auto part = list.substr(start, end - start);
    if (part.empty()) throw ConfigError("empty entry in model list");
    out.push_back(parse_model_kind(part));
    start = end + 1;
  }
  return out;
}

bool is_trainable(ModelKind kind) {
  return kind != ModelKind::pd && kind != ModelKind::pcc && kind != ModelKind::vs;
}

void ModelConfig::validate() const {
  if (dm.k_x < 1 || dm.k_p < 1 || dm.k_r < 1)
    throw ConfigError("k_x, k_p and k_r must be at least 1");
  if (am_k < 1) throw ConfigError("am_k must be at least 1");
  if (bc_k < 1) throw ConfigError("bc_k must be at least 1");
  if (mp_k_y < 1 || mp_k_x < 1) throw ConfigError("mp_k_y and mp_k_x must be at least 1");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
  if (schedule) schedule->validate();
  criterion.validate();
  fold_in.validate();
}

TrainedModel train_model(ModelKind kind, const RatingTable& train, const ModelConfig& config,
                         std::uint64_t seed, const EmObserver& observer) {
  config.validate();
  TrainedModel m;
  m.kind = kind;
  m.item_labels = train.item_labels();
  if (m.item_labels.empty())
    for (std::size_t i = 0; i < train.num_items(); ++i) m.item_labels.push_back(train.item_label(ItemId(i)));
  switch (kind) {
    case ModelKind::dm: {
      auto fit = dm_train(train, config.dm, config.schedule, config.criterion, seed, observer);
      m.params = std::move(fit.params);
      m.trace = std::move(fit.trace);
      break;
    }
    case ModelKind::baseline: {
      auto fit = baseline_train(train, config.dm.k_x, config.dm.k_p, config.schedule,
                                config.criterion, seed, observer);
      m.params = std::move(fit.params);
      m.trace = std::move(fit.trace);
      break;
    }
    case ModelKind::mp: {
      auto fit = mp_train(train, config.mp_k_y, config.mp_k_x, config.schedule, config.criterion,
                          seed, config.mp_max_pairs, observer);
      m.params = std::move(fit.params);
      m.trace = std::move(fit.trace);
      break;
    }
    case ModelKind::am: {
      auto fit = am_train(train, config.am_k, config.schedule, config.criterion, seed, observer);
      m.params = std::move(fit.params);
      m.trace = std::move(fit.trace);
      break;
    }
    case ModelKind::bc: {
      auto fit = bc_train(train, config.bc_k, config.schedule, config.criterion, seed, observer);
      m.params = std::move(fit.params);
      m.trace = std::move(fit.trace);
      break;
    }
    default:
      throw ValidationError("model kind '" + std::string(model_kind_name(kind)) +
                            "' is memory-based and has nothing to train");
  }
  return m;
}

Recommender::Recommender(ModelKind kind, const RatingTable& train, const ModelConfig& config,
                         std::uint64_t seed, const EmObserver& observer)
    : kind_(kind), config_(config) {
  config_.validate();
  if (is_trainable(kind)) {
    model_ = train_model(kind, train, config, seed, observer);
  } else {
    train_ = &train;
    num_items_ = train.num_items();
    scale_ = train.scale();
  }
  prepare();
}

Recommender::Recommender(TrainedModel model, const ModelConfig& config)
    : kind_(model.kind), config_(config), model_(std::move(model)) {
  config_.validate();
  prepare();
}

void Recommender::prepare() {
  if (!model_) return;
  std::visit(
      [this](const auto& p) {
        num_items_ = p.num_items;
        scale_ = p.scale;
      },
      model_->params);
  if (const auto* p = std::get_if<DmParams>(&model_->params))
    dm_ = std::make_shared<const DmPredictor>(*p);
}

ItemScorer Recommender::for_user(std::span<const ItemRating> observed) const {
  const auto mode = config_.mode;
  const double alpha = config_.alpha;
  const auto& fc = config_.fold_in;
  switch (kind_) {
    case ModelKind::dm: {
      auto dm = dm_;
      auto prof = dm->fold_in(observed, alpha, fc);
      return [dm, prof = std::move(prof), mode](ItemId x) -> std::optional<double> {
        return dm->predict(prof, x, mode);
      };
    }
    case ModelKind::baseline: {
      const auto& p = std::get<BaselineParams>(model_->params);
      auto prof = baseline_fold_in(p, observed, alpha, fc);
      return [&p, prof = std::move(prof), mode](ItemId x) -> std::optional<double> {
        return baseline_predict(p, prof, x, mode);
      };
    }
    case ModelKind::mp: {
      const auto& p = std::get<MpParams>(model_->params);
      const auto pairs = pairs_from_ratings(0, observed);
      // With a single given rating there are no pairs; the class prior stands in.
      MpUserProfile prof = pairs.empty() ? MpUserProfile{p.p_zy.values()}
                                         : mp_fold_in(p, pairs, fc);
      std::vector<ItemRating> obs(observed.begin(), observed.end());
      return [&p, prof = std::move(prof), obs = std::move(obs)](ItemId x) -> std::optional<double> {
        return mp_predict(p, prof, obs, x);
      };
    }
    case ModelKind::am: {
      const auto& p = std::get<AmParams>(model_->params);
      auto q = am_fold_in(p, observed, alpha, fc);
      return [&p, q = std::move(q), mode](ItemId x) -> std::optional<double> {
        return am_predict(p, q, x, mode);
      };
    }
    case ModelKind::bc: {
      const auto& p = std::get<BcParams>(model_->params);
      if (observed.empty()) throw FoldInError("prediction needs at least one observed rating");
      const auto post = bc_posterior(p, observed);
      return [&p, post, mode](ItemId x) -> std::optional<double> {
        if (x >= p.num_items)
          throw BoundsError("item id " + std::to_string(x) + " out of range for the model");
        std::vector<double> dist(static_cast<std::size_t>(p.scale), 0.0);
        for (std::size_t c = 0; c < p.k; ++c) {
          const auto row = p.p_r_given_c_item.row(p.row(c, x));
          for (std::size_t r = 0; r < dist.size(); ++r) dist[r] += post[c] * row[r];
        }
        normalize(dist);
        return decide(dist, mode);
      };
    }
    case ModelKind::pd: {
      if (observed.empty()) throw FoldInError("prediction needs at least one observed rating");
      auto pd = std::make_shared<const PdPredictor>(*train_, observed, PdConfig{config_.sigma});
      return [pd](ItemId x) -> std::optional<double> {
        const auto r = pd->predict(x);
        return r ? std::optional<double>(*r) : std::nullopt;
      };
    }
    case ModelKind::pcc:
    case ModelKind::vs: {
      auto mem = std::make_shared<const MemoryPredictor>(
          *train_, observed, kind_ == ModelKind::pcc ? Similarity::pearson : Similarity::cosine);
      return [mem](ItemId x) { return mem->predict(x); };
    }
  }
  throw ValidationError("unknown model kind");
}

}  // namespace prefcf
