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
#include "msrec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include "msrec/errors.hpp"
#include "msrec/io.hpp"
#include "msrec/random.hpp"

namespace msrec {

RatingFormat parse_rating_format(std::string_view name) {
  if (name == "tab") return RatingFormat::kTab;
  if (name == "double-colon" || name == "::") return RatingFormat::kDoubleColon;
  throw ConfigError("unknown ratings format '" + std::string(name) +
                    "' (expected tab or double-colon)");
}

IdIndex::IdIndex(std::vector<std::int64_t> raw_ids) : raw_(std::move(raw_ids)) {
  std::sort(raw_.begin(), raw_.end());
  raw_.erase(std::unique(raw_.begin(), raw_.end()), raw_.end());
  dense_.reserve(raw_.size());
  for (std::size_t i = 0; i < raw_.size(); ++i) {
    dense_.emplace(raw_[i], static_cast<std::int32_t>(i));
  }
}

std::optional<std::int32_t> IdIndex::find(std::int64_t raw) const {
  const auto it = dense_.find(raw);
  if (it == dense_.end()) return std::nullopt;
  return it->second;
}

std::int32_t IdIndex::at(std::int64_t raw) const {
  const auto it = dense_.find(raw);
  if (it == dense_.end()) {
    throw LookupError("unknown id " + std::to_string(raw));
  }
  return it->second;
}

RatingsDataset::RatingsDataset(std::vector<InteractionRecord> records,
                               RatingScale scale)
    : records_(std::move(records)), scale_(scale) {
  std::vector<std::int64_t> users, items;
  users.reserve(records_.size());
  items.reserve(records_.size());
  for (const auto& r : records_) {
    if (!scale_.contains(r.rating)) {
      throw ContractError("rating " + io::format_double(r.rating) +
                          " outside scale");
    }
    users.push_back(r.user_id);
    items.push_back(r.item_id);
  }
  users_ = std::make_shared<IdIndex>(std::move(users));
  items_ = std::make_shared<IdIndex>(std::move(items));
  dense_user_.reserve(records_.size());
  dense_item_.reserve(records_.size());
  std::set<std::pair<std::int32_t, std::int32_t>> seen;
  for (const auto& r : records_) {
    const auto u = users_->at(r.user_id);
    const auto i = items_->at(r.item_id);
    if (!seen.emplace(u, i).second) {
      throw ContractError("duplicate (user, item) pair (" +
                          std::to_string(r.user_id) + ", " +
                          std::to_string(r.item_id) + ")");
    }
    dense_user_.push_back(u);
    dense_item_.push_back(i);
  }
}

bool RatingsDataset::has_timestamps() const {
  return std::all_of(records_.begin(), records_.end(),
                     [](const auto& r) { return r.timestamp.has_value(); });
}

double RatingsDataset::mean_rating() const {
  if (records_.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : records_) sum += r.rating;
  return sum / static_cast<double>(records_.size());
}

RatingsDataset RatingsDataset::subset(std::span<const std::size_t> indices) const {
  RatingsDataset out;
  out.scale_ = scale_;
  out.users_ = users_;
  out.items_ = items_;
  out.records_.reserve(indices.size());
  out.dense_user_.reserve(indices.size());
  out.dense_item_.reserve(indices.size());
  for (const auto k : indices) {
    out.records_.push_back(records_.at(k));
    out.dense_user_.push_back(dense_user_[k]);
    out.dense_item_.push_back(dense_item_[k]);
  }
  return out;
}

std::vector<std::vector<std::size_t>> RatingsDataset::by_user() const {
  std::vector<std::vector<std::size_t>> out(n_users());
  for (std::size_t k = 0; k < records_.size(); ++k) {
    out[dense_user_[k]].push_back(k);
  }
  return out;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line,
                                           RatingFormat format) {
  std::vector<std::string_view> fields;
  if (format == RatingFormat::kDoubleColon) {
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find("::", start);
      fields.push_back(io::trim(line.substr(start, pos - start)));
      if (pos == std::string_view::npos) break;
      start = pos + 2;
    }
    return fields;
  }
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

}  // namespace

RatingsDataset parse_ratings(std::string_view text, RatingFormat format,
                             RatingScale scale) {
  std::vector<InteractionRecord> records;
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = io::trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;

    const auto fields = split_fields(line, format);
    if (fields.size() != 3 && fields.size() != 4) {
      throw ParseError(line_no, "expected 3 or 4 fields, got " +
                                    std::to_string(fields.size()));
    }
    InteractionRecord rec;
    try {
      rec.user_id = io::parse_int(fields[0]);
      rec.item_id = io::parse_int(fields[1]);
      rec.rating = io::parse_double(fields[2]);
      if (fields.size() == 4) rec.timestamp = io::parse_int(fields[3]);
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
    if (!std::isfinite(rec.rating) || !scale.contains(rec.rating)) {
      throw ParseError(line_no, "rating " + std::string(fields[2]) +
                                    " outside scale");
    }
    if (!seen.emplace(rec.user_id, rec.item_id).second) {
      throw ParseError(line_no, "duplicate (user, item) pair");
    }
    records.push_back(rec);
  }
  if (records.empty()) throw EmptyDatasetError("no ratings found");
  return RatingsDataset(std::move(records), scale);
}

RatingsDataset load_ratings(const std::filesystem::path& path,
                            RatingFormat format, RatingScale scale) {
  if (!std::filesystem::exists(path)) {
    throw Error("ratings file not found: " + path.string());
  }
  return parse_ratings(io::read_file(path), format, scale);
}

// ---------------------------------------------------------------------------

int SplitPlan::n_folds() const {
  if (const auto* kf = std::get_if<RandomKFold>(&kind)) return kf->k;
  return 1;
}

bool SplitPlan::is_test(std::size_t record, int fold) const {
  if (std::holds_alternative<Temporal>(kind)) return fold_of[record] == 1;
  return fold_of[record] == fold;
}

SplitPlan split_random_kfold(const RatingsDataset& ds, int k,
                             std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold split needs k >= 2");
  SplitPlan plan;
  plan.kind = RandomKFold{k, seed};
  plan.fold_of.assign(ds.size(), SplitPlan::kTrainOnly);
  Rng rng(seed);
  auto groups = ds.by_user();
  for (std::size_t u = 0; u < groups.size(); ++u) {
    auto& idx = groups[u];
    if (idx.size() < static_cast<std::size_t>(k)) {
      if (!idx.empty()) plan.train_only_users.push_back(static_cast<std::int32_t>(u));
      continue;
    }
    rng.shuffle(std::span<std::size_t>(idx));
    // Rotating the first fold spreads the remainder over all folds.
    const auto offset = rng.index(static_cast<std::uint64_t>(k));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      plan.fold_of[idx[j]] = static_cast<int>((j + offset) % k);
    }
  }
  return plan;
}

SplitPlan split_temporal(const RatingsDataset& ds, std::int64_t cutoff) {
  if (!ds.has_timestamps()) {
    throw UnsupportedSplitError("temporal split needs timestamps on every record");
  }
  SplitPlan plan;
  plan.kind = Temporal{cutoff};
  plan.fold_of.reserve(ds.size());
  for (const auto& r : ds.records()) {
    plan.fold_of.push_back(*r.timestamp < cutoff ? 0 : 1);
  }
  return plan;
}

TrainTest materialize(const RatingsDataset& ds, const SplitPlan& plan,
                      int fold) {
  if (plan.fold_of.size() != ds.size()) {
    throw ContractError("split plan does not match dataset");
  }
  if (fold < 0 || fold >= plan.n_folds()) {
    throw ConfigError("fold " + std::to_string(fold) + " out of range");
  }
  std::vector<std::size_t> train, test;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    (plan.is_test(k, fold) ? test : train).push_back(k);
  }
  return {ds.subset(train), ds.subset(test)};
}

// ---------------------------------------------------------------------------

std::vector<std::int32_t> assign_providers(std::size_t n_items,
                                           int n_providers,
                                           const ProviderDistribution& dist,
                                           std::uint64_t seed) {
  if (n_providers < 1) throw ConfigError("n_providers must be >= 1");
  std::vector<std::int32_t> provider_of(n_items, 0);
  if (n_providers == 1) return provider_of;
  Rng rng(seed);

  if (std::holds_alternative<UniformProviders>(dist)) {
    for (auto& p : provider_of) {
      p = static_cast<std::int32_t>(rng.index(static_cast<std::uint64_t>(n_providers)));
    }
    return provider_of;
  }

  const double exponent = std::get<PowerLawProviders>(dist).exponent;
  if (!(exponent > 0.0)) throw ConfigError("power-law exponent must be > 0");
  // x = U^-exponent has rank-size slope -exponent on a log-log plot.
  std::vector<double> weight(n_providers);
  for (auto& w : weight) w = std::pow(1.0 - rng.uniform(), -exponent);
  const double total = std::accumulate(weight.begin(), weight.end(), 0.0);

  // Largest-remainder rounding to exactly n_items.
  std::vector<std::int64_t> size(n_providers);
  std::vector<std::pair<double, int>> remainder(n_providers);
  std::int64_t assigned = 0;
  for (int p = 0; p < n_providers; ++p) {
    const double exact = weight[p] / total * static_cast<double>(n_items);
    size[p] = static_cast<std::int64_t>(std::floor(exact));
    remainder[p] = {exact - static_cast<double>(size[p]), p};
    assigned += size[p];
  }
  std::stable_sort(remainder.begin(), remainder.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::int64_t r = 0; assigned < static_cast<std::int64_t>(n_items); ++r, ++assigned) {
    ++size[remainder[static_cast<std::size_t>(r) % remainder.size()].second];
  }

  std::vector<std::size_t> order(n_items);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  std::size_t cursor = 0;
  for (int p = 0; p < n_providers; ++p) {
    for (std::int64_t j = 0; j < size[p]; ++j) provider_of[order[cursor++]] = p;
  }
  return provider_of;
}

std::vector<std::int64_t> catalog_sizes(std::span<const std::int32_t> provider_of,
                                        int n_providers) {
  std::vector<std::int64_t> sizes(std::max(n_providers, 0), 0);
  for (const auto p : provider_of) {
    if (p < 0 || p >= n_providers) throw ContractError("provider id out of range");
    ++sizes[p];
  }
  return sizes;
}

std::vector<ItemEconomics> sample_item_profits(
    std::span<const std::int64_t> item_ids, const ProfitSpec& spec,
    std::uint64_t seed) {
  if (!(spec.lo < spec.hi)) throw ConfigError("profit bounds need lo < hi");
  if (!(spec.sigma > 0.0)) throw ConfigError("profit sigma must be > 0");
  if (spec.lo < 0.0) throw ConfigError("profit lower bound must be >= 0");
  if (!(spec.commission > 0.0 && spec.commission <= 1.0)) {
    throw ConfigError("commission must lie in (0, 1]");
  }
  Rng rng(seed);
  std::vector<ItemEconomics> out;
  out.reserve(item_ids.size());
  for (const auto id : item_ids) {
    double m = std::clamp(spec.mu + spec.sigma * rng.normal(), spec.lo, spec.hi);
    if (m < kMarginEpsilon) m = std::min(kMarginEpsilon, spec.hi);
    ItemEconomics e;
    e.item_id = id;
    e.margin = m;
    e.price = m / spec.commission;
    e.cost = e.price - e.margin;
    out.push_back(e);
  }
  return out;
}

SensitiveRule SensitiveRule::parse(std::string_view text) {
  text = io::trim(text);
  static constexpr std::pair<std::string_view, Op> kOps[] = {
      {"<=", Op::kLessEqual}, {">=", Op::kGreaterEqual}, {"==", Op::kEqual},
      {"<", Op::kLess},       {">", Op::kGreater},       {"=", Op::kEqual},
  };
  for (const auto& [tok, op] : kOps) {
    const auto pos = text.find(tok);
    if (pos == std::string_view::npos) continue;
    SensitiveRule rule;
    rule.attribute = std::string(io::trim(text.substr(0, pos)));
    rule.op = op;
    rule.value = io::parse_double(text.substr(pos + tok.size()));
    if (rule.attribute.empty()) break;
    return rule;
  }
  throw ConfigError("cannot parse sensitive rule '" + std::string(text) + "'");
}

bool SensitiveRule::matches(double x) const {
  switch (op) {
    case Op::kLess: return x < value;
    case Op::kLessEqual: return x <= value;
    case Op::kGreater: return x > value;
    case Op::kGreaterEqual: return x >= value;
    case Op::kEqual: return x == value;
  }
  return false;
}

std::string SensitiveRule::to_string() const {
  static constexpr const char* kNames[] = {"<", "<=", ">", ">=", "=="};
  return attribute + kNames[static_cast<int>(op)] + io::format_double(value);
}

SensitiveLabels label_sensitive(std::span<const std::int64_t> item_ids,
                                const ItemAttributes& attributes,
                                const SensitiveRule& rule) {
  const auto attr = attributes.find(rule.attribute);
  if (attr == attributes.end()) {
    throw ConfigError("unknown item attribute '" + rule.attribute + "'");
  }
  SensitiveLabels out;
  out.labels.reserve(item_ids.size());
  std::size_t positives = 0;
  for (const auto id : item_ids) {
    const auto it = attr->second.find(id);
    bool label = false;
    if (it == attr->second.end()) {
      ++out.missing;
    } else {
      label = rule.matches(it->second);
    }
    positives += label ? 1 : 0;
    out.labels.push_back(label);
  }
  if (out.missing > 0) {
    out.warnings.push_back(std::to_string(out.missing) + " item(s) lack '" +
                           rule.attribute + "' and were labelled 0");
  }
  if (positives == 0 || positives == item_ids.size()) {
    out.warnings.push_back("rule '" + rule.to_string() +
                           "' puts every item in one group");
  }
  return out;
}

std::unordered_map<std::int64_t, double> load_item_years(
    const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  std::unordered_map<std::int64_t, double> years;
  std::size_t line_no = 0;
  for (auto line : io::split(text, '\n')) {
    ++line_no;
    line = io::trim(line);
    if (line.empty()) continue;
    const auto fields = io::split(line, '|');
    if (fields.size() < 3) {
      throw ParseError(line_no, "expected pipe-delimited item record");
    }
    std::int64_t id;
    try {
      id = io::parse_int(fields[0]);
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
    auto is_year = [](std::string_view s) {
      return s.size() == 4 &&
             std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    const auto date = io::trim(fields[2]);
    if (date.size() >= 4 && is_year(date.substr(date.size() - 4))) {
      years[id] = static_cast<double>(io::parse_int(date.substr(date.size() - 4)));
      continue;
    }
    // Fall back to a "(yyyy)" suffix in the title.
    const auto title = fields[1];
    for (auto pos = title.rfind('('); pos != std::string_view::npos && pos > 0;
         pos = title.rfind('(', pos - 1)) {
      if (pos + 5 < title.size() && title[pos + 5] == ')' &&
          is_year(title.substr(pos + 1, 4))) {
        years[id] = static_cast<double>(io::parse_int(title.substr(pos + 1, 4)));
        break;
      }
    }
  }
  return years;
}

std::string economics_csv(std::span<const ItemEconomics> econ) {
  std::ostringstream out;
  out << "item_id,provider_id,price,cost,margin,sensitive\n";
  for (const auto& e : econ) {
    out << e.item_id << ',' << e.provider_id << ',' << io::format_double(e.price)
        << ',' << io::format_double(e.cost) << ',' << io::format_double(e.margin)
        << ',' << (e.sensitive ? 1 : 0) << '\n';
  }
  return out.str();
}

void write_economics_csv(const std::filesystem::path& path,
                         std::span<const ItemEconomics> econ) {
  io::write_file_atomic(path, economics_csv(econ));
}

std::vector<ItemEconomics> read_economics_csv(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  std::vector<ItemEconomics> out;
  std::size_t line_no = 0;
  for (auto line : io::split(text, '\n')) {
    ++line_no;
    line = io::trim(line);
    if (line.empty() || line_no == 1) continue;
    const auto f = io::split(line, ',');
    if (f.size() != 6) throw ParseError(line_no, "expected 6 economics columns");
    try {
      ItemEconomics e;
      e.item_id = io::parse_int(f[0]);
      e.provider_id = static_cast<std::int32_t>(io::parse_int(f[1]));
      e.price = io::parse_double(f[2]);
      e.cost = io::parse_double(f[3]);
      e.margin = io::parse_double(f[4]);
      e.sensitive = io::parse_int(f[5]) != 0;
      out.push_back(e);
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

std::vector<ItemEconomics> align_economics(const RatingsDataset& ds,
                                           std::span<const ItemEconomics> econ) {
  std::unordered_map<std::int64_t, const ItemEconomics*> by_id;
  for (const auto& e : econ) by_id[e.item_id] = &e;
  std::vector<ItemEconomics> out;
  out.reserve(ds.n_items());
  for (const auto raw : ds.items().raw_ids()) {
    const auto it = by_id.find(raw);
    if (it == by_id.end()) {
      throw LookupError("no economics for item " + std::to_string(raw));
    }
    out.push_back(*it->second);
  }
  return out;
}

// ---------------------------------------------------------------------------

StakeholderScenario StakeholderScenario::parse(std::string_view consumer,
                                               std::string_view provider,
                                               std::string_view system) {
  StakeholderScenario s;
  if (consumer == "passive") {
    s.consumer = Consumer::kPassive;
  } else if (consumer == "active") {
    s.consumer = Consumer::kActive;
  } else {
    throw ConfigError("scenario.consumer must be passive|active");
  }
  const auto parts = io::split(provider, '_');
  if (parts.size() != 2) {
    throw ConfigError("scenario.provider must be <neutral|personalized>_<passive|active>");
  }
  if (parts[0] == "neutral") {
    s.provider_reach = ProviderReach::kNeutral;
  } else if (parts[0] == "personalized") {
    s.provider_reach = ProviderReach::kPersonalized;
  } else {
    throw ConfigError("scenario.provider reach must be neutral|personalized");
  }
  if (parts[1] == "passive") {
    s.provider_mode = ProviderMode::kPassive;
  } else if (parts[1] == "active") {
    s.provider_mode = ProviderMode::kActive;
  } else {
    throw ConfigError("scenario.provider mode must be passive|active");
  }
  if (system == "neutral") {
    s.system = System::kNeutral;
  } else if (system == "aggregate") {
    s.system = System::kAggregate;
  } else if (system == "targeted") {
    s.system = System::kTargeted;
  } else {
    throw ConfigError("scenario.system must be neutral|aggregate|targeted");
  }
  return s;
}

std::string StakeholderScenario::label() const {
  std::string out = "<C_";
  out += consumer == Consumer::kPassive ? "passive" : "active";
  out += ", P_";
  out += provider_reach == ProviderReach::kNeutral ? "neutral" : "personalized";
  out += provider_mode == ProviderMode::kPassive ? "_passive" : "_active";
  out += ", S_";
  out += system == System::kNeutral     ? "neutral"
         : system == System::kAggregate ? "aggregate"
                                        : "targeted";
  out += ">";
  return out;
}

}  // namespace msrec
