#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace prefcf {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;
// Ratings live on the integer scale 1..R.
using Rating = int;

struct RatingTriple {
  UserId user;
  ItemId item;
  Rating rating;
  bool operator==(const RatingTriple&) const = default;
};

struct ItemRating {
  ItemId item;
  Rating rating;
  bool operator==(const ItemRating&) const = default;
};

// Immutable sparse (user, item, rating) collection with per-user and per-item
// indexes. Ids are dense: every triple has user < num_users() and
// item < num_items(). Insertion order of the triples is preserved.
class RatingTable {
 public:
  RatingTable() = default;

  // Validates ranges, the rating scale and (user, item) uniqueness. Labels are
  // optional; when given they must cover every id.
  static RatingTable build(std::size_t num_users, std::size_t num_items, int scale,
                           std::vector<RatingTriple> triples,
                           std::vector<std::string> user_labels = {},
                           std::vector<std::string> item_labels = {});

  std::size_t num_users() const noexcept { return num_users_; }
  std::size_t num_items() const noexcept { return num_items_; }
  int scale() const noexcept { return scale_; }
  std::size_t size() const noexcept { return triples_.size(); }
  bool empty() const noexcept { return triples_.empty(); }

  std::span<const RatingTriple> triples() const noexcept { return triples_; }
  const RatingTriple& triple(std::size_t i) const noexcept { return triples_[i]; }

  // Triple indices of one user / item, in insertion order.
  std::span<const std::size_t> user_triples(UserId u) const;
  std::span<const std::size_t> item_triples(ItemId i) const;
  std::size_t user_count(UserId u) const { return user_triples(u).size(); }

  // The user's (item, rating) pairs sorted by item id.
  std::span<const ItemRating> profile(UserId u) const;
  // The user's (item, rating) pairs in insertion order.
  std::vector<ItemRating> ratings_in_order(UserId u) const;
  std::optional<Rating> rating(UserId u, ItemId i) const;

  const std::vector<std::string>& user_labels() const noexcept { return user_labels_; }
  const std::vector<std::string>& item_labels() const noexcept { return item_labels_; }
  std::string user_label(UserId u) const;
  std::string item_label(ItemId i) const;
  std::optional<ItemId> find_item(std::string_view label) const;
  std::optional<UserId> find_user(std::string_view label) const;

  bool operator==(const RatingTable& o) const {
    return num_users_ == o.num_users_ && num_items_ == o.num_items_ && scale_ == o.scale_ &&
           triples_ == o.triples_ && user_labels_ == o.user_labels_ &&
           item_labels_ == o.item_labels_;
  }

 private:
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  int scale_ = 0;
  std::vector<RatingTriple> triples_;
  std::vector<std::size_t> user_offsets_, user_index_;
  std::vector<std::size_t> item_offsets_, item_index_;
  std::vector<ItemRating> profiles_;
  std::vector<std::string> user_labels_, item_labels_;
};

// Arithmetic mean of the user's ratings; ValidationError if the user has none.
double user_mean(const RatingTable& table, UserId user);
double mean_rating(std::span<const ItemRating> ratings);

enum class DataFormat { canonical_tsv, movielens_100k };

DataFormat parse_data_format(std::string_view name);

// Canonical TSV: "user<TAB>item<TAB>rating" per line, '#' lines are comments and
// "# scale=R" declares the rating scale. MovieLens-100k: four whitespace
// separated columns, the timestamp is ignored. Ids are compacted in order of
// first appearance. `declared_scale` wins over a header; otherwise R is the
// largest observed rating.
RatingTable parse_dataset(std::istream& in, DataFormat format,
                          std::optional<int> declared_scale = std::nullopt);
RatingTable load_dataset(const std::string& path, DataFormat format,
                         std::optional<int> declared_scale = std::nullopt);

void write_canonical_tsv(const RatingTable& table, std::ostream& out);
void save_canonical_tsv(const RatingTable& table, const std::string& path);

enum class GivenSelection { first_in_file, seeded_random };

struct SplitProtocol {
  std::size_t train_user_count = 0;
  std::size_t given_count = 5;
  GivenSelection given_selection = GivenSelection::first_in_file;
  std::uint64_t seed = 0;
};

struct SplitResult {
  // Users 0..train_user_count-1; num_users() == train_user_count.
  RatingTable train;
  // Test users keep their original ids (num_users() == source N).
  RatingTable test_observed;
  RatingTable test_heldout;
  // Test users that kept at least one held-out rating, ascending.
  std::vector<UserId> test_users;
};

// The first train_user_count users (by id) train; every other user with more
// than given_count ratings reveals given_count of them and holds out the rest.
SplitResult split(const RatingTable& table, const SplitProtocol& protocol);

}  // namespace prefcf
