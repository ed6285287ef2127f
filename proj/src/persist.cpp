#include "prefcf/persist.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"

#include "prefcf/error.hpp"

namespace prefcf {
namespace {

using nlohmann::json;

constexpr const char* kFormat = "prefcf-model";
constexpr int kVersion = 1;

json table_json(const ProbTable& t) {
  return {{"rows", t.rows()}, {"cols", t.cols()}, {"values", t.values()}};
}

ProbTable table_from(const json& j, const char* name, std::size_t rows, std::size_t cols) {
  if (!j.contains(name)) throw ValidationError(std::string("model file lacks table ") + name);
  const auto& t = j.at(name);
  if (t.at("rows").get<std::size_t>() != rows || t.at("cols").get<std::size_t>() != cols)
    throw ValidationError(std::string("table ") + name + " has unexpected dimensions");
  ProbTable out(rows, cols);
  const auto values = t.at("values").get<std::vector<double>>();
  if (values.size() != rows * cols)
    throw ValidationError(std::string("table ") + name + " has the wrong number of values");
  out.values() = values;
  return out;
}

std::size_t dim(const json& d, const char* key) {
  if (!d.contains(key)) throw ValidationError(std::string("model file lacks dimension ") + key);
  return d.at(key).get<std::size_t>();
}

}  // namespace

void save_model(const TrainedModel& model, std::ostream& out) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["kind"] = std::string(model_kind_name(model.kind));
  json dims, tables;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        dims["N"] = [&] {
          if constexpr (std::is_same_v<T, BcParams>) return std::size_t{0};
          else return p.num_users;
        }();
        dims["M"] = p.num_items;
        dims["R"] = p.scale;
        if constexpr (std::is_same_v<T, DmParams>) {
          dims["K_x"] = p.k_x, dims["K_p"] = p.k_p, dims["K_r"] = p.k_r, dims["K_pref"] = p.k_pref;
          tables["p_zx"] = table_json(p.p_zx);
          tables["p_x_given_zx"] = table_json(p.p_x_given_zx);
          tables["p_zp_given_y"] = table_json(p.p_zp_given_y);
          tables["p_zr_given_y"] = table_json(p.p_zr_given_y);
          tables["p_zpref_given_zp_zx"] = table_json(p.p_zpref_given_zp_zx);
          tables["p_r_given_zr_zpref"] = table_json(p.p_r_given_zr_zpref);
        } else if constexpr (std::is_same_v<T, BaselineParams>) {
          dims["K_x"] = p.k_x, dims["K_p"] = p.k_p;
          tables["p_zx"] = table_json(p.p_zx);
          tables["p_x_given_zx"] = table_json(p.p_x_given_zx);
          tables["p_zp_given_y"] = table_json(p.p_zp_given_y);
          tables["p_r_given_zp_zx"] = table_json(p.p_r_given_zp_zx);
        } else if constexpr (std::is_same_v<T, MpParams>) {
          dims["K_y"] = p.k_y, dims["K_x"] = p.k_x;
          tables["p_zy"] = table_json(p.p_zy);
          tables["p_y_given_zy"] = table_json(p.p_y_given_zy);
          tables["p_zx"] = table_json(p.p_zx);
          tables["p_x_given_zx"] = table_json(p.p_x_given_zx);
          tables["v"] = table_json(p.v);
        } else if constexpr (std::is_same_v<T, AmParams>) {
          dims["K"] = p.k;
          tables["p_z"] = table_json(p.p_z);
          tables["p_x_given_z"] = table_json(p.p_x_given_z);
          tables["p_y_given_z"] = table_json(p.p_y_given_z);
          tables["p_r_given_z"] = table_json(p.p_r_given_z);
        } else {
          dims["K"] = p.k;
          tables["p_c"] = table_json(p.p_c);
          tables["p_r_given_c_item"] = table_json(p.p_r_given_c_item);
        }
      },
      model.params);
  j["dims"] = dims;
  j["tables"] = tables;
  j["item_labels"] = model.item_labels;
  j["training"] = {{"iterations", model.trace.iterations},
                   {"converged", model.trace.converged},
                   {"final_loglik", model.trace.final_loglik()}};
  out << j.dump(1) << '\n';
  if (!out) throw IoError("could not write the model");
}

TrainedModel load_model(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", std::string()) != kFormat)
      throw ValidationError("not a prefcf model file");
    if (j.at("version").get<int>() != kVersion)
      throw ValidationError("unsupported model file version");
    TrainedModel m;
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    const auto& d = j.at("dims");
    const auto& t = j.at("tables");
    const std::size_t N = dim(d, "N"), M = dim(d, "M");
    const int R = d.at("R").get<int>();
    if (R < 1) throw ValidationError("rating scale must be at least 1");
    const auto Rs = static_cast<std::size_t>(R);
    switch (m.kind) {
      case ModelKind::dm: {
        DmParams p;
        p.num_users = N, p.num_items = M, p.scale = R;
        p.k_x = dim(d, "K_x"), p.k_p = dim(d, "K_p"), p.k_r = dim(d, "K_r");
        p.k_pref = dim(d, "K_pref");
        p.p_zx = table_from(t, "p_zx", 1, p.k_x);
        p.p_x_given_zx = table_from(t, "p_x_given_zx", p.k_x, M);
        p.p_zp_given_y = table_from(t, "p_zp_given_y", N, p.k_p);
        p.p_zr_given_y = table_from(t, "p_zr_given_y", N, p.k_r);
        p.p_zpref_given_zp_zx = table_from(t, "p_zpref_given_zp_zx", p.k_p * p.k_x, p.k_pref);
        p.p_r_given_zr_zpref = table_from(t, "p_r_given_zr_zpref", p.k_r * p.k_pref, Rs);
        p.check_shapes();
        m.params = std::move(p);
        break;
      }
      case ModelKind::baseline: {
        BaselineParams p;
        p.num_users = N, p.num_items = M, p.scale = R;
        p.k_x = dim(d, "K_x"), p.k_p = dim(d, "K_p");
        p.p_zx = table_from(t, "p_zx", 1, p.k_x);
        p.p_x_given_zx = table_from(t, "p_x_given_zx", p.k_x, M);
        p.p_zp_given_y = table_from(t, "p_zp_given_y", N, p.k_p);
        p.p_r_given_zp_zx = table_from(t, "p_r_given_zp_zx", p.k_p * p.k_x, Rs);
        p.check_shapes();
        m.params = std::move(p);
        break;
      }
      case ModelKind::mp: {
        MpParams p;
        p.num_users = N, p.num_items = M, p.scale = R;
        p.k_y = dim(d, "K_y"), p.k_x = dim(d, "K_x");
        p.p_zy = table_from(t, "p_zy", 1, p.k_y);
        p.p_y_given_zy = table_from(t, "p_y_given_zy", p.k_y, N);
        p.p_zx = table_from(t, "p_zx", 1, p.k_x);
        p.p_x_given_zx = table_from(t, "p_x_given_zx", p.k_x, M);
        p.v = table_from(t, "v", p.k_x, p.k_y);
        p.check_shapes();
        m.params = std::move(p);
        break;
      }
      case ModelKind::am: {
        AmParams p;
        p.num_users = N, p.num_items = M, p.scale = R, p.k = dim(d, "K");
        p.p_z = table_from(t, "p_z", 1, p.k);
        p.p_x_given_z = table_from(t, "p_x_given_z", p.k, M);
        p.p_y_given_z = table_from(t, "p_y_given_z", p.k, N);
        p.p_r_given_z = table_from(t, "p_r_given_z", p.k, Rs);
        p.check_shapes();
        m.params = std::move(p);
        break;
      }
      case ModelKind::bc: {
        BcParams p;
        p.num_items = M, p.scale = R, p.k = dim(d, "K");
        p.p_c = table_from(t, "p_c", 1, p.k);
        p.p_r_given_c_item = table_from(t, "p_r_given_c_item", p.k * M, Rs);
        p.check_shapes();
        m.params = std::move(p);
        break;
      }
      default:
        throw ValidationError("model kind '" + std::string(model_kind_name(m.kind)) +
                              "' cannot be stored");
    }
    m.item_labels = j.value("item_labels", std::vector<std::string>{});
    if (!m.item_labels.empty() && m.item_labels.size() != M)
      throw ValidationError("item label count does not match the item dimension");
    if (j.contains("training")) {
      const auto& tr = j.at("training");
      m.trace.iterations = tr.value("iterations", std::size_t{0});
      m.trace.converged = tr.value("converged", false);
      m.trace.initial_loglik = tr.value("final_loglik", 0.0);
    }
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model file: ") + e.what());
  }
}

void save_model_file(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save_model(model, out);
}

TrainedModel load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return load_model(in);
}

}  // namespace prefcf
