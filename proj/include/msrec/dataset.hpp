// Copyright 2026 The msrec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace msrec {

struct InteractionRecord {
  std::int64_t user_id = 0;
  std::int64_t item_id = 0;
  double rating = 0.0;
  std::optional<std::int64_t> timestamp;
};

struct RatingScale {
  double min = 1.0;
  double max = 5.0;

  bool contains(double r) const { return r >= min && r <= max; }
  double clamp(double r) const { return r < min ? min : (r > max ? max : r); }

  friend bool operator==(const RatingScale&, const RatingScale&) = default;
};

enum class RatingFormat { kTab, kDoubleColon };

RatingFormat parse_rating_format(std::string_view name);

// Bijective map between raw ids and the dense range [0, size).
class IdIndex {
 public:
  IdIndex() = default;
  // Dense ids are assigned in ascending raw-id order.
  explicit IdIndex(std::vector<std::int64_t> raw_ids);

  std::size_t size() const { return raw_.size(); }
  std::int64_t raw(std::int32_t dense) const { return raw_.at(dense); }
  std::optional<std::int32_t> find(std::int64_t raw) const;
  std::int32_t at(std::int64_t raw) const;
  std::span<const std::int64_t> raw_ids() const { return raw_; }

 private:
  std::vector<std::int64_t> raw_;
  std::unordered_map<std::int64_t, std::int32_t> dense_;
};

// A set of ratings together with the user/item reindex maps. Subsets made by
// `subset` share the parent's maps so dense ids stay comparable across the
// train and test halves of a split.
class RatingsDataset {
 public:
  RatingsDataset() = default;
  RatingsDataset(std::vector<InteractionRecord> records, RatingScale scale);

  std::span<const InteractionRecord> records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const RatingScale& scale() const { return scale_; }

  const IdIndex& users() const { return *users_; }
  const IdIndex& items() const { return *items_; }
  std::size_t n_users() const { return users_->size(); }
  std::size_t n_items() const { return items_->size(); }

  // Dense ids of record k.
  std::int32_t user_of(std::size_t k) const { return dense_user_[k]; }
  std::int32_t item_of(std::size_t k) const { return dense_item_[k]; }

  bool has_timestamps() const;
  double mean_rating() const;

  RatingsDataset subset(std::span<const std::size_t> indices) const;

  // Record indices grouped per dense user id.
  std::vector<std::vector<std::size_t>> by_user() const;

 private:
  std::vector<InteractionRecord> records_;
  RatingScale scale_;
  std::shared_ptr<const IdIndex> users_ = std::make_shared<IdIndex>();
  std::shared_ptr<const IdIndex> items_ = std::make_shared<IdIndex>();
  std::vector<std::int32_t> dense_user_;
  std::vector<std::int32_t> dense_item_;
};

RatingsDataset load_ratings(const std::filesystem::path& path,
                            RatingFormat format,
                            RatingScale scale = RatingScale{});

RatingsDataset parse_ratings(std::string_view text, RatingFormat format,
                             RatingScale scale = RatingScale{});

// ---------------------------------------------------------------------------
// Splits

struct RandomKFold {
  int k = 5;
  std::uint64_t seed = 0;
};

struct Temporal {
  std::int64_t cutoff = 0;
};

struct SplitPlan {
  static constexpr int kTrainOnly = -1;

  std::variant<RandomKFold, Temporal> kind;
  // k-fold: fold id in [0, k) or kTrainOnly. Temporal: 0 = train, 1 = test.
  std::vector<int> fold_of;
  // Dense ids of users with fewer than k records (k-fold only).
  std::vector<std::int32_t> train_only_users;

  int n_folds() const;
  bool is_test(std::size_t record, int fold) const;
};

SplitPlan split_random_kfold(const RatingsDataset& ds, int k,
                             std::uint64_t seed);
SplitPlan split_temporal(const RatingsDataset& ds, std::int64_t cutoff);

struct TrainTest {
  RatingsDataset train;
  RatingsDataset test;
};

// Fold `fold` is the test set, everything else is train. For temporal plans
// pass fold = 0.
TrainTest materialize(const RatingsDataset& ds, const SplitPlan& plan,
                      int fold);

// ---------------------------------------------------------------------------
// Multistakeholder simulation

struct UniformProviders {};
struct PowerLawProviders {
  double exponent = 1.5;
};
using ProviderDistribution = std::variant<UniformProviders, PowerLawProviders>;

// Provider id per dense item id.
std::vector<std::int32_t> assign_providers(std::size_t n_items,
                                           int n_providers,
                                           const ProviderDistribution& dist,
                                           std::uint64_t seed);

std::vector<std::int64_t> catalog_sizes(std::span<const std::int32_t> provider_of,
                                        int n_providers);

struct ItemEconomics {
  std::int64_t item_id = 0;
  double price = 0.0;
  double cost = 0.0;
  double margin = 0.0;
  std::int32_t provider_id = 0;
  bool sensitive = false;
};

struct ProfitSpec {
  double mu = 2.0;
  double sigma = 1.0;
  double lo = 0.0;
  double hi = 4.0;
  // Share of the price that is margin; price = margin / commission.
  double commission = 0.25;
};

inline constexpr double kMarginEpsilon = 1e-6;

std::vector<ItemEconomics> sample_item_profits(
    std::span<const std::int64_t> item_ids, const ProfitSpec& spec,
    std::uint64_t seed);

// Simple "attribute op value" rule, e.g. "year<1990".
struct SensitiveRule {
  enum class Op { kLess, kLessEqual, kGreater, kGreaterEqual, kEqual };
  std::string attribute;
  Op op = Op::kLess;
  double value = 0.0;

  static SensitiveRule parse(std::string_view text);
  bool matches(double x) const;
  std::string to_string() const;
};

// attribute name -> (raw item id -> value)
using ItemAttributes =
    std::map<std::string, std::unordered_map<std::int64_t, double>>;

struct SensitiveLabels {
  std::vector<bool> labels;  // per entry of the item id list
  std::size_t missing = 0;   // items lacking the attribute, labelled 0
  std::vector<std::string> warnings;
};

SensitiveLabels label_sensitive(std::span<const std::int64_t> item_ids,
                                const ItemAttributes& attributes,
                                const SensitiveRule& rule);

// Release year per raw item id from a MovieLens u.item file. Items without a
// parseable year are absent from the map.
std::unordered_map<std::int64_t, double> load_item_years(
    const std::filesystem::path& path);

std::string economics_csv(std::span<const ItemEconomics> econ);
void write_economics_csv(const std::filesystem::path& path,
                         std::span<const ItemEconomics> econ);
std::vector<ItemEconomics> read_economics_csv(const std::filesystem::path& path);

// Ordered by dense item id of `ds`; every dataset item must be present.
std::vector<ItemEconomics> align_economics(const RatingsDataset& ds,
                                           std::span<const ItemEconomics> econ);

// ---------------------------------------------------------------------------

// Label in the <C, P, S> taxonomy of multistakeholder designs. Metadata only.
struct StakeholderScenario {
  enum class Consumer { kPassive, kActive };
  enum class ProviderReach { kNeutral, kPersonalized };
  enum class ProviderMode { kPassive, kActive };
  enum class System { kNeutral, kAggregate, kTargeted };

  Consumer consumer = Consumer::kPassive;
  ProviderReach provider_reach = ProviderReach::kNeutral;
  ProviderMode provider_mode = ProviderMode::kPassive;
  System system = System::kNeutral;

  static StakeholderScenario parse(std::string_view consumer,
                                   std::string_view provider,
                                   std::string_view system);
  std::string label() const;
};

}  // namespace msrec
