#include "prefcf/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "prefcf/config.hpp"
#include "prefcf/dm.hpp"
#include "prefcf/error.hpp"
#include "prefcf/eval.hpp"
#include "prefcf/persist.hpp"
#include "prefcf/recommender.hpp"
#include "prefcf/simd.hpp"

namespace prefcf {
namespace {

struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;

  void add(CLI::App* app) {
    app->add_option("--config", config_file, "key=value configuration file");
    app->add_option("--set", sets, "override one configuration key (key=value)");
    seed_opt = app->add_option("--seed", seed, "random seed");
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config_file.empty()) load_config_file(c, config_file);
    for (const auto& s : sets) apply_assignment(c, s);
    if (seed_opt && seed_opt->count()) c.seed = seed;
    return c;
  }
};

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::optional<int> scale_opt(int scale) {
  return scale > 0 ? std::optional<int>(scale) : std::nullopt;
}

// Lines of "item<whitespace>rating"; '#' lines are comments.
std::vector<std::pair<std::string, Rating>> read_observed(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::pair<std::string, Rating>> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string item, rating, extra;
    if (!(ls >> item >> rating) || (ls >> extra))
      throw ParseError("expected 'item rating'", n);
    int r = 0;
    const auto [p, ec] = std::from_chars(rating.data(), rating.data() + rating.size(), r);
    if (ec != std::errc() || p != rating.data() + rating.size())
      throw ParseError("rating '" + rating + "' is not an integer", n);
    out.emplace_back(item, r);
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty() && line[0] != '#') out.push_back(line);
  }
  return out;
}

ItemId lookup_item(const std::vector<std::string>& labels, const std::string& label) {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw ValidationError("item '" + label + "' is unknown to the model");
  return static_cast<ItemId>(it - labels.begin());
}

std::vector<std::string> label_list(const RatingTable& t) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < t.num_items(); ++i) out.push_back(t.item_label(ItemId(i)));
  return out;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"prefcf: latent-class collaborative filtering workbench", "prefcf"};
  app.require_subcommand(1);
  std::string isa = "auto";
  app.add_option("--isa", isa, "vector kernel set: auto, scalar or avx2");

  // convert
  auto* convert = app.add_subcommand("convert", "convert a rating file to canonical TSV");
  std::string conv_in, conv_out = "-", conv_format = "movielens-100k";
  int conv_scale = 0;
  convert->add_option("--input", conv_in, "input rating file")->required();
  convert->add_option("--format", conv_format, "canonical-tsv or movielens-100k");
  convert->add_option("--output", conv_out, "output path, - for standard output");
  convert->add_option("--scale", conv_scale, "rating scale R (default: largest rating)");

  // train
  auto* train = app.add_subcommand("train", "train a model and save it");
  std::string tr_data, tr_format = "canonical-tsv", tr_out, tr_model;
  bool tr_verbose = false;
  ConfigFlags tr_cfg;
  train->add_option("--data", tr_data, "training ratings")->required();
  train->add_option("--format", tr_format, "canonical-tsv or movielens-100k");
  train->add_option("--model", tr_model, "dm, baseline, mp, am or bc");
  train->add_option("--out", tr_out, "model file to write")->required();
  train->add_flag("--verbose", tr_verbose, "log the log-likelihood after every iteration");
  tr_cfg.add(train);

  // predict
  auto* predict = app.add_subcommand("predict", "predict ratings for one user");
  std::string pr_model, pr_memory, pr_data, pr_format = "canonical-tsv", pr_observed, pr_items_file;
  std::vector<std::string> pr_items;
  ConfigFlags pr_cfg;
  auto* pr_model_opt = predict->add_option("--model", pr_model, "saved model file");
  auto* pr_memory_opt =
      predict->add_option("--memory", pr_memory, "memory-based method: pd, pcc or vs");
  predict->add_option("--data", pr_data, "training ratings for --memory");
  predict->add_option("--format", pr_format, "format of --data");
  predict->add_option("--observed", pr_observed, "the user's known ratings (item rating)")
      ->required();
  predict->add_option("--items", pr_items, "items to predict")->delimiter(',');
  predict->add_option("--items-file", pr_items_file, "file with one item per line");
  pr_model_opt->excludes(pr_memory_opt);
  pr_cfg.add(predict);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "run the given-N evaluation protocol");
  std::string ev_data, ev_format = "canonical-tsv", ev_models = "dm", ev_name, ev_out = "-";
  std::vector<std::size_t> ev_train, ev_given{5, 10, 20};
  bool ev_timing = false;
  ConfigFlags ev_cfg;
  evaluate->add_option("--data", ev_data, "rating file")->required();
  evaluate->add_option("--format", ev_format, "canonical-tsv or movielens-100k");
  evaluate->add_option("--models", ev_models, "comma-separated model kinds");
  evaluate->add_option("--train-users", ev_train, "training-set sizes")
      ->delimiter(',')
      ->required();
  evaluate->add_option("--given", ev_given, "given-rating counts")->delimiter(',');
  evaluate->add_option("--dataset-name", ev_name, "dataset name (default: file stem)");
  evaluate->add_option("--output", ev_out, "report path, - for standard output");
  evaluate->add_flag("--timing", ev_timing, "report wall-clock seconds per cell");
  ev_cfg.add(evaluate);

  // synth
  auto* synth = app.add_subcommand("synth", "sample a synthetic rating table");
  std::string sy_out = "-", sy_generator = "separated";
  std::size_t sy_rpu = 20;
  std::uint64_t sy_seed = 42;
  SeparatedDesign design;
  synth->add_option("--out", sy_out, "output path, - for standard output");
  synth->add_option("--generator", sy_generator, "separated or random");
  synth->add_option("--users", design.num_users, "number of users");
  synth->add_option("--items", design.num_items, "number of items");
  synth->add_option("--ratings-per-user", sy_rpu, "ratings drawn per user");
  synth->add_option("--scale", design.scale, "rating scale R");
  synth->add_option("--k-x", design.sizes.k_x, "item classes");
  synth->add_option("--k-p", design.sizes.k_p, "preference classes");
  synth->add_option("--k-r", design.sizes.k_r, "rating classes");
  synth->add_option("--k-pref", design.sizes.k_pref, "preference levels (0: R)");
  synth->add_option("--item-purity", design.item_purity, "mass of an item class on its items");
  synth->add_option("--pref-purity", design.pref_purity, "mass of the dominant preference level");
  synth->add_option("--rating-spread", design.rating_spread, "rating kernel width");
  synth->add_option("--pref-span", design.pref_span, "share of the scale spanned by preference");
  synth->add_option("--seed", sy_seed, "random seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const auto to_output = [&](const std::string& path, const auto& write) {
    if (path == "-") {
      write(out);
      return;
    }
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    write(f);
    if (!f) throw IoError("could not write " + path);
  };

  try {
    simd::set_active_isa(simd::parse_isa(isa));

    if (*convert) {
      const auto table = load_dataset(conv_in, parse_data_format(conv_format), scale_opt(conv_scale));
      to_output(conv_out, [&](std::ostream& o) { write_canonical_tsv(table, o); });
      return 0;
    }

    if (*train) {
      RunConfig cfg = tr_cfg.resolve();
      if (!tr_model.empty()) cfg.model = parse_model_kind(tr_model);
      cfg.validate();
      const auto table = load_dataset(tr_data, parse_data_format(tr_format), scale_opt(cfg.scale));
      EmObserver observer;
      if (tr_verbose)
        observer = [&err](const EmProgress& p) {
          err << "iter " << p.iteration << " beta " << p.beta << " loglik " << p.loglik << '\n';
        };
      const auto model = train_model(cfg.model, table, cfg.params, cfg.seed, observer);
      save_model_file(model, tr_out);
      out << "trained " << model_kind_name(model.kind) << " on " << table.num_users()
          << " users, " << table.num_items() << " items, " << table.size() << " ratings: "
          << model.trace.iterations << " iterations, "
          << (model.trace.converged ? "converged" : "not converged") << ", loglik "
          << model.trace.final_loglik() << '\n';
      return 0;
    }

    if (*predict) {
      RunConfig cfg = pr_cfg.resolve();
      cfg.validate();
      std::optional<RatingTable> data;
      std::optional<Recommender> rec;
      std::vector<std::string> labels;
      if (!pr_model.empty()) {
        auto model = load_model_file(pr_model);
        labels = model.item_labels;
        rec.emplace(std::move(model), cfg.params);
        if (labels.empty())
          for (std::size_t i = 0; i < rec->num_items(); ++i) labels.push_back(std::to_string(i));
      } else if (!pr_memory.empty()) {
        const auto kind = parse_model_kind(pr_memory);
        if (is_trainable(kind))
          throw ValidationError("--memory takes pd, pcc or vs; use --model for trained models");
        if (pr_data.empty()) throw ValidationError("--memory needs --data");
        data = load_dataset(pr_data, parse_data_format(pr_format), scale_opt(cfg.scale));
        labels = label_list(*data);
        rec.emplace(kind, *data, cfg.params, cfg.seed);
      } else {
        throw ValidationError("predict needs --model or --memory");
      }

      std::vector<ItemRating> observed;
      for (const auto& [label, r] : read_observed(pr_observed)) {
        if (r < 1 || r > rec->scale())
          throw ValidationError("observed rating " + std::to_string(r) + " outside 1.." +
                                std::to_string(rec->scale()));
        observed.push_back({lookup_item(labels, label), r});
      }
      if (observed.empty()) throw FoldInError("the observed file has no ratings");
      std::vector<std::string> items = pr_items;
      if (!pr_items_file.empty())
        for (auto& s : read_lines(pr_items_file)) items.push_back(std::move(s));
      if (items.empty()) throw ValidationError("no items to predict (use --items or --items-file)");
      std::vector<ItemId> ids;
      for (const auto& s : items) ids.push_back(lookup_item(labels, s));

      const auto scorer = rec->for_user(observed);
      const double fallback = abstention_fallback(observed, rec->scale());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto p = scorer(ids[i]);
        out << items[i] << '\t' << format_value(p ? *p : fallback) << '\n';
      }
      return 0;
    }

    if (*evaluate) {
      RunConfig cfg = ev_cfg.resolve();
      cfg.validate();
      const auto table = load_dataset(ev_data, parse_data_format(ev_format), scale_opt(cfg.scale));
      ProtocolConfig pc;
      pc.models = parse_model_list(ev_models);
      pc.train_sizes = ev_train;
      pc.given_counts = ev_given;
      pc.selection = cfg.given_selection;
      pc.model = cfg.params;
      pc.seed = cfg.seed;
      pc.dataset_name =
          ev_name.empty() ? std::filesystem::path(ev_data).stem().string() : ev_name;
      for (auto g : pc.given_counts)
        if (g < 1) throw ProtocolError("given counts must be at least 1");
      const auto report = run_protocol(table, pc);
      for (const auto& row : report.rows)
        if (!row.error.empty())
          err << "warning: " << row.model << " train_users=" << row.train_users
              << " given=" << row.given << " failed: " << row.error << '\n';
      to_output(ev_out, [&](std::ostream& o) { render_report(report, o, {ev_timing}); });
      return 0;
    }

    if (*synth) {
      DmSample sample;
      if (sy_generator == "separated") {
        sample = dm_synthesize(make_separated_params(design, sy_seed), design.num_users, sy_rpu,
                               sy_seed + 1);
      } else if (sy_generator == "random") {
        std::mt19937_64 rng(sy_seed);
        const auto params = DmParams::random(design.num_users, design.num_items, design.scale,
                                             design.sizes, rng);
        sample = dm_synthesize(params, design.num_users, sy_rpu, sy_seed + 1);
      } else {
        throw ValidationError("unknown generator '" + sy_generator + "'");
      }
      to_output(sy_out, [&](std::ostream& o) { write_canonical_tsv(sample.table, o); });
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace prefcf
