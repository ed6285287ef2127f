#include "prefcf/rating_table.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "prefcf/error.hpp"

namespace prefcf {
namespace {

// CSR-style index: offsets has n+1 entries, index lists triple ids per key.
template <class Key>
void build_index(std::size_t n, const std::vector<RatingTriple>& triples, Key key,
                 std::vector<std::size_t>& offsets, std::vector<std::size_t>& index) {
  offsets.assign(n + 1, 0);
  for (const auto& t : triples) ++offsets[key(t) + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  index.assign(triples.size(), 0);
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (std::size_t i = 0; i < triples.size(); ++i) index[cursor[key(triples[i])]++] = i;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_fields(std::string_view line, bool tabs_only) {
  std::vector<std::string_view> out;
  if (tabs_only) {
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find('\t', start);
      out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    return out;
  }
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<long long> parse_int(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

struct IdCompactor {
  std::unordered_map<std::string, std::uint32_t> ids;
  std::vector<std::string> labels;
  std::uint32_t operator()(std::string_view label) {
    auto [it, inserted] = ids.try_emplace(std::string(label), static_cast<std::uint32_t>(labels.size()));
    if (inserted) labels.emplace_back(label);
    return it->second;
  }
};

}  // namespace

RatingTable RatingTable::build(std::size_t num_users, std::size_t num_items, int scale,
                               std::vector<RatingTriple> triples,
                               std::vector<std::string> user_labels,
                               std::vector<std::string> item_labels) {
  if (scale < 0) throw ValidationError("rating scale must be non-negative");
  if (!user_labels.empty() && user_labels.size() != num_users)
    throw ValidationError("user label count does not match user count");
  if (!item_labels.empty() && item_labels.size() != num_items)
    throw ValidationError("item label count does not match item count");

  for (std::size_t i = 0; i < triples.size(); ++i) {
    const auto& t = triples[i];
    if (t.user >= num_users || t.item >= num_items)
      throw ValidationError("triple " + std::to_string(i) + " has an id out of range");
    if (t.rating < 1 || t.rating > scale)
      throw ValidationError("triple " + std::to_string(i) + ": rating " +
                            std::to_string(t.rating) + " outside 1.." + std::to_string(scale));
  }

  RatingTable table;
  table.num_users_ = num_users;
  table.num_items_ = num_items;
  table.scale_ = scale;
  table.triples_ = std::move(triples);
  table.user_labels_ = std::move(user_labels);
  table.item_labels_ = std::move(item_labels);
  build_index(num_users, table.triples_, [](const RatingTriple& t) { return t.user; },
              table.user_offsets_, table.user_index_);
  build_index(num_items, table.triples_, [](const RatingTriple& t) { return t.item; },
              table.item_offsets_, table.item_index_);

  table.profiles_.reserve(table.triples_.size());
  for (std::size_t u = 0; u < num_users; ++u) {
    const auto first = table.profiles_.size();
    for (std::size_t k = table.user_offsets_[u]; k < table.user_offsets_[u + 1]; ++k) {
      const auto& t = table.triples_[table.user_index_[k]];
      table.profiles_.push_back({t.item, t.rating});
    }
    auto begin = table.profiles_.begin() + static_cast<std::ptrdiff_t>(first);
    std::sort(begin, table.profiles_.end(),
              [](const ItemRating& a, const ItemRating& b) { return a.item < b.item; });
    auto dup = std::adjacent_find(begin, table.profiles_.end(),
                                  [](const ItemRating& a, const ItemRating& b) {
                                    return a.item == b.item;
                                  });
    if (dup != table.profiles_.end())
      throw ValidationError("duplicate rating for user " + table.user_label(UserId(u)) +
                            " and item " + table.item_label(dup->item));
  }
  return table;
}

std::span<const std::size_t> RatingTable::user_triples(UserId u) const {
  if (u >= num_users_) throw BoundsError("user id " + std::to_string(u) + " out of range");
  return {user_index_.data() + user_offsets_[u], user_offsets_[u + 1] - user_offsets_[u]};
}

std::span<const std::size_t> RatingTable::item_triples(ItemId i) const {
  if (i >= num_items_) throw BoundsError("item id " + std::to_string(i) + " out of range");
  return {item_index_.data() + item_offsets_[i], item_offsets_[i + 1] - item_offsets_[i]};
}

std::span<const ItemRating> RatingTable::profile(UserId u) const {
  if (u >= num_users_) throw BoundsError("user id " + std::to_string(u) + " out of range");
  return {profiles_.data() + user_offsets_[u], user_offsets_[u + 1] - user_offsets_[u]};
}

std::vector<ItemRating> RatingTable::ratings_in_order(UserId u) const {
  std::vector<ItemRating> out;
  for (std::size_t k : user_triples(u)) out.push_back({triples_[k].item, triples_[k].rating});
  return out;
}

std::optional<Rating> RatingTable::rating(UserId u, ItemId i) const {
  const auto p = profile(u);
  auto it = std::lower_bound(p.begin(), p.end(), i,
                             [](const ItemRating& a, ItemId id) { return a.item < id; });
  if (it == p.end() || it->item != i) return std::nullopt;
  return it->rating;
}

std::string RatingTable::user_label(UserId u) const {
  return u < user_labels_.size() ? user_labels_[u] : std::to_string(u);
}

std::string RatingTable::item_label(ItemId i) const {
  return i < item_labels_.size() ? item_labels_[i] : std::to_string(i);
}

std::optional<ItemId> RatingTable::find_item(std::string_view label) const {
  if (item_labels_.empty()) {
    const auto v = parse_int(label);
    if (v && *v >= 0 && static_cast<std::size_t>(*v) < num_items_) return ItemId(*v);
    return std::nullopt;
  }
  const auto it = std::find(item_labels_.begin(), item_labels_.end(), label);
  if (it == item_labels_.end()) return std::nullopt;
  return ItemId(it - item_labels_.begin());
}

std::optional<UserId> RatingTable::find_user(std::string_view label) const {
  if (user_labels_.empty()) {
    const auto v = parse_int(label);
    if (v && *v >= 0 && static_cast<std::size_t>(*v) < num_users_) return UserId(*v);
    return std::nullopt;
  }
  const auto it = std::find(user_labels_.begin(), user_labels_.end(), label);
  if (it == user_labels_.end()) return std::nullopt;
  return UserId(it - user_labels_.begin());
}

double mean_rating(std::span<const ItemRating> ratings) {
  if (ratings.empty()) throw ValidationError("mean of an empty rating set is undefined");
  double s = 0.0;
  for (const auto& r : ratings) s += r.rating;
  return s / static_cast<double>(ratings.size());
}

double user_mean(const RatingTable& table, UserId user) {
  const auto p = table.profile(user);
  if (p.empty())
    throw ValidationError("user " + table.user_label(user) + " has no ratings; mean undefined");
  return mean_rating(p);
}

DataFormat parse_data_format(std::string_view name) {
  if (name == "canonical-tsv" || name == "tsv") return DataFormat::canonical_tsv;
  if (name == "movielens-100k" || name == "movielens") return DataFormat::movielens_100k;
  throw ValidationError("unknown data format '" + std::string(name) + "'");
}

RatingTable parse_dataset(std::istream& in, DataFormat format, std::optional<int> declared_scale) {
  IdCompactor users, items;
  std::vector<RatingTriple> triples;
  std::vector<std::size_t> line_of;
  std::optional<int> header_scale;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    if (trim(line).front() == '#') {
      auto body = trim(trim(line).substr(1));
      if (body.substr(0, 6) == "scale=") {
        const auto v = parse_int(body.substr(6));
        if (!v || *v < 1) throw ParseError("bad scale declaration", line_no);
        header_scale = static_cast<int>(*v);
      }
      continue;
    }
    const bool canonical = format == DataFormat::canonical_tsv;
    const auto fields = split_fields(line, canonical);
    const std::size_t expected = canonical ? 3 : 4;
    if (fields.size() != expected)
      throw ParseError("expected " + std::to_string(expected) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    const auto user = trim(fields[0]);
    const auto item = trim(fields[1]);
    if (user.empty() || item.empty()) throw ParseError("empty user or item field", line_no);
    const auto rating = parse_int(fields[2]);
    if (!rating) throw ParseError("rating is not an integer", line_no);
    if (*rating < 1 || *rating > 1'000'000)
      throw ValidationError("line " + std::to_string(line_no) + ": rating " +
                            std::string(trim(fields[2])) + " outside the rating scale");
    triples.push_back({users(user), items(item), static_cast<Rating>(*rating)});
    line_of.push_back(line_no);
  }

  int max_seen = 0;
  for (const auto& t : triples) max_seen = std::max(max_seen, t.rating);
  const int scale = declared_scale.value_or(header_scale.value_or(max_seen));
  for (std::size_t i = 0; i < triples.size(); ++i)
    if (triples[i].rating > scale)
      throw ValidationError("line " + std::to_string(line_of[i]) + ": rating " +
                            std::to_string(triples[i].rating) + " outside 1.." +
                            std::to_string(scale));

  // Report duplicates with the offending line before handing over to build().
  {
    std::unordered_map<std::uint64_t, std::size_t> seen;
    for (std::size_t i = 0; i < triples.size(); ++i) {
      const std::uint64_t key = (std::uint64_t(triples[i].user) << 32) | triples[i].item;
      auto [it, inserted] = seen.emplace(key, line_of[i]);
      if (!inserted)
        throw ValidationError("line " + std::to_string(line_of[i]) +
                              ": duplicate rating for (" + users.labels[triples[i].user] + ", " +
                              items.labels[triples[i].item] + "), first seen on line " +
                              std::to_string(it->second));
    }
  }

  const auto n = users.labels.size();
  const auto m = items.labels.size();
  return RatingTable::build(n, m, scale, std::move(triples), std::move(users.labels),
                            std::move(items.labels));
}

RatingTable load_dataset(const std::string& path, DataFormat format,
                         std::optional<int> declared_scale) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_dataset(in, format, declared_scale);
}

void write_canonical_tsv(const RatingTable& table, std::ostream& out) {
  out << "# scale=" << table.scale() << '\n';
  for (const auto& t : table.triples())
    out << table.user_label(t.user) << '\t' << table.item_label(t.item) << '\t' << t.rating
        << '\n';
}

void save_canonical_tsv(const RatingTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_canonical_tsv(table, out);
  if (!out) throw IoError("write to '" + path + "' failed");
}

SplitResult split(const RatingTable& table, const SplitProtocol& protocol) {
  if (protocol.given_count < 1) throw ProtocolError("given_count must be at least 1");
  if (protocol.train_user_count >= table.num_users())
    throw ProtocolError("train_user_count " + std::to_string(protocol.train_user_count) +
                        " must be smaller than the user count " +
                        std::to_string(table.num_users()));

  const auto n_train = protocol.train_user_count;
  std::vector<RatingTriple> train, observed, heldout;
  std::vector<UserId> test_users;
  std::mt19937_64 rng(protocol.seed);

  for (const auto& t : table.triples())
    if (t.user < n_train) train.push_back(t);

  for (std::size_t u = n_train; u < table.num_users(); ++u) {
    const auto idx = table.user_triples(UserId(u));
    if (idx.size() <= protocol.given_count) continue;
    std::vector<std::size_t> order(idx.begin(), idx.end());
    std::vector<char> given(order.size(), 0);
    if (protocol.given_selection == GivenSelection::first_in_file) {
      std::fill(given.begin(), given.begin() + static_cast<std::ptrdiff_t>(protocol.given_count), 1);
    } else {
      std::vector<std::size_t> pos(order.size());
      std::iota(pos.begin(), pos.end(), 0);
      std::shuffle(pos.begin(), pos.end(), rng);
      for (std::size_t k = 0; k < protocol.given_count; ++k) given[pos[k]] = 1;
    }
    for (std::size_t k = 0; k < order.size(); ++k)
      (given[k] ? observed : heldout).push_back(table.triple(order[k]));
    test_users.push_back(UserId(u));
  }

  std::vector<std::string> train_labels;
  if (!table.user_labels().empty())
    train_labels.assign(table.user_labels().begin(),
                        table.user_labels().begin() + static_cast<std::ptrdiff_t>(n_train));

  SplitResult result;
  result.train = RatingTable::build(n_train, table.num_items(), table.scale(), std::move(train),
                                    std::move(train_labels), table.item_labels());
  result.test_observed = RatingTable::build(table.num_users(), table.num_items(), table.scale(),
                                            std::move(observed), table.user_labels(),
                                            table.item_labels());
  result.test_heldout = RatingTable::build(table.num_users(), table.num_items(), table.scale(),
                                           std::move(heldout), table.user_labels(),
                                           table.item_labels());
  result.test_users = std::move(test_users);
  return result;
}

}  // namespace prefcf
