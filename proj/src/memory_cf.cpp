#include "prefcf/memory_cf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prefcf/error.hpp"

namespace prefcf {
namespace {

std::vector<ItemRating> sorted(std::span<const ItemRating> v) {
  std::vector<ItemRating> out(v.begin(), v.end());
  std::sort(out.begin(), out.end(),
            [](const ItemRating& x, const ItemRating& y) { return x.item < y.item; });
  return out;
}

// Calls f(ra, rb) for every item both sorted profiles contain.
template <class F>
void co_rated(const std::vector<ItemRating>& a, const std::vector<ItemRating>& b, F&& f) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].item < b[j].item) {
      ++i;
    } else if (b[j].item < a[i].item) {
      ++j;
    } else {
      f(a[i].rating, b[j].rating);
      ++i, ++j;
    }
  }
}

}  // namespace

double pearson_weight(std::span<const ItemRating> a, std::span<const ItemRating> b) {
  const auto sa = sorted(a), sb = sorted(b);
  std::size_t n = 0;
  double ma = 0.0, mb = 0.0;
  co_rated(sa, sb, [&](Rating x, Rating y) {
    ++n;
    ma += x;
    mb += y;
  });
  if (n < 2) return 0.0;
  ma /= double(n);
  mb /= double(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  co_rated(sa, sb, [&](Rating x, Rating y) {
    sxy += (x - ma) * (y - mb);
    sxx += (x - ma) * (x - ma);
    syy += (y - mb) * (y - mb);
  });
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double cosine_weight(std::span<const ItemRating> a, std::span<const ItemRating> b) {
  const auto sa = sorted(a), sb = sorted(b);
  double dot = 0.0;
  bool any = false;
  co_rated(sa, sb, [&](Rating x, Rating y) {
    dot += double(x) * y;
    any = true;
  });
  if (!any) return 0.0;
  double na = 0.0, nb = 0.0;
  for (const auto& o : sa) na += double(o.rating) * o.rating;
  for (const auto& o : sb) nb += double(o.rating) * o.rating;
  return dot / std::sqrt(na * nb);
}

MemoryPredictor::MemoryPredictor(const RatingTable& train, std::span<const ItemRating> observed,
                                 Similarity method)
    : train_(train), weights_(train.num_users(), 0.0), means_(train.num_users(), 0.0),
      observed_mean_(0.0) {
  if (observed.empty()) throw FoldInError("prediction needs at least one observed rating");
  for (const auto& o : observed) observed_mean_ += o.rating;
  observed_mean_ /= double(observed.size());
  for (std::size_t y = 0; y < train.num_users(); ++y) {
    const auto prof = train.profile(UserId(y));
    if (prof.empty()) continue;
    means_[y] = mean_rating(prof);
    weights_[y] = method == Similarity::pearson ? pearson_weight(observed, prof)
                                                : cosine_weight(observed, prof);
  }
}

std::optional<double> MemoryPredictor::predict(ItemId item) const {
  if (item >= train_.num_items())
    throw BoundsError("item id " + std::to_string(item) + " out of range");
  double num = 0.0, den = 0.0;
  for (const auto idx : train_.item_triples(item)) {
    const auto& tr = train_.triple(idx);
    const double w = weights_[tr.user];
    if (w == 0.0) continue;
    num += w * (tr.rating - means_[tr.user]);
    den += std::abs(w);
  }
  if (den == 0.0) return std::nullopt;
  return std::clamp(observed_mean_ + num / den, 1.0, double(train_.scale()));
}

std::optional<double> memory_predict(const RatingTable& train,
                                     std::span<const ItemRating> observed, ItemId item,
                                     Similarity method) {
  return MemoryPredictor(train, observed, method).predict(item);
}

}  // namespace prefcf
