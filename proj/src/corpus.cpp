#include "toxdebias/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "toxdebias/errors.hpp"
#include "toxdebias/rng.hpp"
#include "toxdebias/text_io.hpp"

namespace toxdebias {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 4> kDialectNames = {"aae", "wae", "hispanic",
                                                           "other"};

[[noreturn]] void fail_at(std::size_t line, std::string_view field,
                          const std::string& what) {
  std::ostringstream os;
  os << "line " << line;
  if (!field.empty()) os << ", field '" << field << "'";
  os << ": " << what;
  throw DataError(os.str());
}

void assign_labels(Instance& inst, std::optional<RawLabel> raw,
                   std::optional<Label> label, std::size_t line) {
  inst.raw_label = raw.value_or(RawLabel::unlabeled);
  const Label derived = label_from_raw(inst.raw_label);
  if (label) {
    if (*label == Label::unlabeled) fail_at(line, "label", "label must be toxic or nontoxic");
    if (derived != Label::unlabeled && derived != *label) {
      fail_at(line, "label", "label '" + std::string(to_string(*label)) +
                                 "' contradicts raw_label '" +
                                 std::string(to_string(inst.raw_label)) + "'");
    }
    inst.label = *label;
  } else {
    inst.label = derived;
  }
}

void check_simplex_at(const DialectProbs& probs, std::size_t line) {
  try {
    validate_simplex(probs);
  } catch (const DataError& e) {
    fail_at(line, "dialect", e.what());
  }
}

Instance instance_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) fail_at(line, "", "record is not a JSON object");
  Instance inst;
  auto id = j.find("id");
  if (id == j.end() || !id->is_string()) fail_at(line, "id", "missing or not a string");
  inst.id = id->get<std::string>();
  if (inst.id.empty()) fail_at(line, "id", "empty id");
  auto text = j.find("text");
  if (text == j.end() || !text->is_string()) fail_at(line, "text", "missing or not a string");
  inst.text = text->get<std::string>();

  std::optional<RawLabel> raw;
  if (auto it = j.find("raw_label"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) fail_at(line, "raw_label", "not a string");
    raw = parse_raw_label(it->get<std::string>());
    if (!raw) fail_at(line, "raw_label", "unknown value '" + it->get<std::string>() + "'");
  }
  std::optional<Label> label;
  if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) fail_at(line, "label", "not a string");
    label = parse_label(it->get<std::string>());
    if (!label) fail_at(line, "label", "unknown value '" + it->get<std::string>() + "'");
  }
  assign_labels(inst, raw, label, line);

  if (auto it = j.find("dialect"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) fail_at(line, "dialect", "not an object");
    DialectProbs probs;
    for (std::size_t d = 0; d < kDialectNames.size(); ++d) {
      auto v = it->find(std::string(kDialectNames[d]));
      if (v == it->end() || !v->is_number()) {
        fail_at(line, "dialect", "missing numeric '" + std::string(kDialectNames[d]) + "'");
      }
      probs.p[d] = v->get<double>();
    }
    check_simplex_at(probs, line);
    inst.dialect = probs;
  }
  if (auto it = j.find("author_group"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) fail_at(line, "author_group", "not a string");
    inst.author_group = parse_author_group(it->get<std::string>());
    if (!inst.author_group) {
      fail_at(line, "author_group", "unknown value '" + it->get<std::string>() + "'");
    }
  }
  return inst;
}

json instance_to_json(const Instance& inst) {
  json j;
  j["id"] = inst.id;
  j["text"] = inst.text;
  if (inst.raw_label != RawLabel::unlabeled) j["raw_label"] = to_string(inst.raw_label);
  if (inst.label != Label::unlabeled) j["label"] = to_string(inst.label);
  if (inst.dialect) {
    json d;
    for (std::size_t k = 0; k < kDialectNames.size(); ++k) {
      d[std::string(kDialectNames[k])] = inst.dialect->p[k];
    }
    j["dialect"] = std::move(d);
  }
  if (inst.author_group) j["author_group"] = to_string(*inst.author_group);
  return j;
}

void check_unique_ids(const Dataset& dataset, const std::vector<std::size_t>& lines) {
  std::unordered_set<std::string> seen;
  seen.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!seen.insert(dataset[i].id).second) {
      const std::size_t line = i < lines.size() ? lines[i] : i + 1;
      fail_at(line, "id", "duplicate id '" + dataset[i].id + "'");
    }
  }
}

const std::vector<std::string> kTsvColumns = {"id",  "text", "raw_label", "label",    "aae",
                                              "wae", "hispanic", "other", "author_group"};

double parse_real(const std::string& cell, std::size_t line, std::string_view field) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    fail_at(line, field, "not a number: '" + cell + "'");
  }
}

}  // namespace

std::string_view to_string(RawLabel v) {
  switch (v) {
    case RawLabel::hateful: return "hateful";
    case RawLabel::abusive: return "abusive";
    case RawLabel::neither: return "neither";
    case RawLabel::spam: return "spam";
    case RawLabel::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

std::string_view to_string(Label v) {
  switch (v) {
    case Label::toxic: return "toxic";
    case Label::nontoxic: return "nontoxic";
    case Label::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

std::string_view to_string(Dialect v) { return kDialectNames[static_cast<int>(v)]; }

std::string_view to_string(AuthorGroup v) {
  return v == AuthorGroup::white ? "white" : "african_american";
}

std::optional<RawLabel> parse_raw_label(std::string_view s) {
  for (auto v : {RawLabel::hateful, RawLabel::abusive, RawLabel::neither, RawLabel::spam,
                 RawLabel::unlabeled}) {
    if (s == to_string(v)) return v;
  }
  return std::nullopt;
}

std::optional<Label> parse_label(std::string_view s) {
  for (auto v : {Label::toxic, Label::nontoxic, Label::unlabeled}) {
    if (s == to_string(v)) return v;
  }
  return std::nullopt;
}

std::optional<Dialect> parse_dialect(std::string_view s) {
  for (std::size_t i = 0; i < kDialectNames.size(); ++i) {
    if (s == kDialectNames[i]) return static_cast<Dialect>(i);
  }
  return std::nullopt;
}

std::optional<AuthorGroup> parse_author_group(std::string_view s) {
  if (s == "white") return AuthorGroup::white;
  if (s == "african_american") return AuthorGroup::african_american;
  return std::nullopt;
}

std::optional<DatasetFormat> parse_format(std::string_view s) {
  if (s == "jsonl") return DatasetFormat::jsonl;
  if (s == "tsv") return DatasetFormat::tsv;
  return std::nullopt;
}

Label label_from_raw(RawLabel raw) {
  switch (raw) {
    case RawLabel::hateful:
    case RawLabel::abusive: return Label::toxic;
    case RawLabel::neither: return Label::nontoxic;
    default: return Label::unlabeled;
  }
}

void validate_simplex(const DialectProbs& probs) {
  double sum = 0.0;
  for (std::size_t d = 0; d < 4; ++d) {
    const double v = probs.p[d];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      std::ostringstream os;
      os << "dialect probability '" << kDialectNames[d] << "' = " << v << " outside [0,1]";
      throw DataError(os.str());
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    std::ostringstream os;
    os << "dialect probabilities sum to " << sum << ", expected 1";
    throw DataError(os.str());
  }
}

void validate_dataset(const Dataset& dataset) {
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].dialect) check_simplex_at(*dataset[i].dialect, i + 1);
  }
  check_unique_ids(dataset, {});
}

Dataset parse_jsonl(std::string_view content, std::string provenance) {
  Dataset out;
  out.provenance = std::move(provenance);
  std::vector<std::size_t> lines;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(content)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_at(line_no, "", std::string("malformed JSON: ") + e.what());
    }
    out.instances.push_back(instance_from_json(j, line_no));
    lines.push_back(line_no);
  }
  check_unique_ids(out, lines);
  return out;
}

Dataset parse_tsv(std::string_view content, std::string provenance) {
  Dataset out;
  out.provenance = std::move(provenance);
  auto rows = split_lines(content);
  std::size_t line_no = 0;
  std::vector<int> column_of(kTsvColumns.size(), -1);
  bool have_header = false;
  std::vector<std::size_t> lines;
  for (std::string_view row : rows) {
    ++line_no;
    if (row.empty()) continue;
    auto cells = split_tsv_row(row);
    if (!have_header) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        auto it = std::find(kTsvColumns.begin(), kTsvColumns.end(), cells[c]);
        if (it == kTsvColumns.end()) fail_at(line_no, cells[c], "unknown column");
        column_of[it - kTsvColumns.begin()] = static_cast<int>(c);
      }
      if (column_of[0] < 0 || column_of[1] < 0) {
        fail_at(line_no, "", "header must contain id and text columns");
      }
      have_header = true;
      continue;
    }
    auto cell = [&](std::size_t col) -> std::optional<std::string> {
      const int c = column_of[col];
      if (c < 0 || static_cast<std::size_t>(c) >= cells.size() || cells[c].empty()) {
        return std::nullopt;
      }
      return cells[c];
    };
    if (cells.size() > kTsvColumns.size() || cells.size() < 2) {
      fail_at(line_no, "", "unexpected number of columns");
    }
    Instance inst;
    auto id = cell(0);
    if (!id) fail_at(line_no, "id", "missing");
    inst.id = unescape_tsv(*id);
    inst.text = unescape_tsv(cell(1).value_or(""));
    std::optional<RawLabel> raw;
    if (auto v = cell(2)) {
      raw = parse_raw_label(*v);
      if (!raw) fail_at(line_no, "raw_label", "unknown value '" + *v + "'");
    }
    std::optional<Label> label;
    if (auto v = cell(3)) {
      label = parse_label(*v);
      if (!label) fail_at(line_no, "label", "unknown value '" + *v + "'");
    }
    assign_labels(inst, raw, label, line_no);
    int present = 0;
    DialectProbs probs;
    for (std::size_t d = 0; d < 4; ++d) {
      if (auto v = cell(4 + d)) {
        probs.p[d] = parse_real(*v, line_no, kDialectNames[d]);
        ++present;
      }
    }
    if (present != 0 && present != 4) {
      fail_at(line_no, "dialect", "all four dialect columns must be present together");
    }
    if (present == 4) {
      check_simplex_at(probs, line_no);
      inst.dialect = probs;
    }
    if (auto v = cell(8)) {
      inst.author_group = parse_author_group(*v);
      if (!inst.author_group) fail_at(line_no, "author_group", "unknown value '" + *v + "'");
    }
    out.instances.push_back(std::move(inst));
    lines.push_back(line_no);
  }
  if (!have_header) fail_at(1, "", "missing header row");
  check_unique_ids(out, lines);
  return out;
}

std::string to_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& inst : dataset.instances) {
    out += instance_to_json(inst).dump();
    out += '\n';
  }
  return out;
}

std::string to_tsv(const Dataset& dataset) {
  std::string out;
  for (std::size_t c = 0; c < kTsvColumns.size(); ++c) {
    if (c) out += '\t';
    out += kTsvColumns[c];
  }
  out += '\n';
  for (const auto& inst : dataset.instances) {
    out += escape_tsv(inst.id);
    out += '\t';
    out += escape_tsv(inst.text);
    out += '\t';
    if (inst.raw_label != RawLabel::unlabeled) out += to_string(inst.raw_label);
    out += '\t';
    if (inst.label != Label::unlabeled) out += to_string(inst.label);
    for (std::size_t d = 0; d < 4; ++d) {
      out += '\t';
      if (inst.dialect) out += format_real(inst.dialect->p[d]);
    }
    out += '\t';
    if (inst.author_group) out += to_string(*inst.author_group);
    out += '\n';
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  const std::string content = read_file(path);
  Dataset ds;
  try {
    ds = format == DatasetFormat::jsonl ? parse_jsonl(content, path.string())
                                        : parse_tsv(content, path.string());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  ds.split_name = path.stem().string();
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path,
                  DatasetFormat format) {
  write_file(path, format == DatasetFormat::jsonl ? to_jsonl(dataset) : to_tsv(dataset));
}

AggregationResult aggregate_labels(const Dataset& dataset) {
  AggregationResult result;
  result.dataset.provenance = dataset.provenance;
  result.dataset.split_name = dataset.split_name;
  auto& counts = result.counts;
  for (const auto& inst : dataset.instances) {
    Instance out = inst;
    switch (inst.raw_label) {
      case RawLabel::spam: ++counts.spam_dropped; continue;
      case RawLabel::hateful: ++counts.hateful_to_toxic; break;
      case RawLabel::abusive: ++counts.abusive_to_toxic; break;
      case RawLabel::neither: ++counts.neither_to_nontoxic; break;
      case RawLabel::unlabeled: ++counts.unlabeled_kept; break;
    }
    if (inst.raw_label != RawLabel::unlabeled) out.label = label_from_raw(inst.raw_label);
    result.dataset.instances.push_back(std::move(out));
  }
  return result;
}

std::vector<std::size_t> largest_remainder_quotas(const std::vector<std::size_t>& sizes,
                                                  double fraction) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  std::vector<std::size_t> quotas(sizes.size());
  std::vector<double> remainders(sizes.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double exact = fraction * static_cast<double>(sizes[i]);
    quotas[i] = std::min(sizes[i], static_cast<std::size_t>(std::floor(exact)));
    remainders[i] = exact - static_cast<double>(quotas[i]);
    assigned += quotas[i];
  }
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  // Hand out the leftover units by descending remainder; a second pass covers
  // the rare case where capacity, not remainder, is the binding constraint.
  for (int pass = 0; pass < 2 && assigned < target; ++pass) {
    for (std::size_t i : order) {
      if (assigned >= target) break;
      if (quotas[i] < sizes[i] && (pass == 1 || remainders[i] > 0.0)) {
        ++quotas[i];
        ++assigned;
      }
    }
  }
  for (auto it = order.rbegin(); it != order.rend() && assigned > target; ++it) {
    if (quotas[*it] > 0) {
      --quotas[*it];
      --assigned;
    }
  }
  return quotas;
}

std::array<std::size_t, 2> label_counts(const Dataset& dataset) {
  std::array<std::size_t, 2> counts{};
  for (const auto& inst : dataset.instances) ++counts[label_value(inst)];
  return counts;
}

std::array<std::size_t, 2> class_quotas(const Dataset& dataset, double fraction) {
  const auto counts = label_counts(dataset);
  const auto q = largest_remainder_quotas({counts[0], counts[1]}, fraction);
  for (int c = 0; c < 2; ++c) {
    if (counts[c] > 0 && q[c] == 0) {
      throw DataError("sampling fraction " + format_real(fraction) + " leaves class '" +
                      std::string(to_string(static_cast<Label>(c))) + "' with 0 instances");
    }
  }
  return {q[0], q[1]};
}

std::vector<std::size_t> stratified_sample_indices(const Dataset& dataset,
                                                   const SamplingSpec& spec) {
  if (!(spec.target_fraction > 0.0 && spec.target_fraction <= 1.0)) {
    throw UsageError("target fraction must be in (0, 1], got " + format_real(spec.target_fraction));
  }
  std::vector<std::size_t> all(dataset.size());
  std::iota(all.begin(), all.end(), 0);
  if (spec.target_fraction == 1.0) return all;

  Rng rng(spec.seed);
  std::vector<std::size_t> chosen;
  if (spec.preserve_label_proportions) {
    const auto quotas = class_quotas(dataset, spec.target_fraction);
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < dataset.size(); ++i) by_class[label_value(dataset[i])].push_back(i);
    for (int c = 0; c < 2; ++c) {
      rng.shuffle(std::span(by_class[c]));
      chosen.insert(chosen.end(), by_class[c].begin(), by_class[c].begin() + quotas[c]);
    }
  } else {
    const auto n = static_cast<std::size_t>(
        std::llround(spec.target_fraction * static_cast<double>(dataset.size())));
    rng.shuffle(std::span(all));
    chosen.assign(all.begin(), all.begin() + n);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

Dataset stratified_sample(const Dataset& dataset, const SamplingSpec& spec) {
  return subset(dataset, stratified_sample_indices(dataset, spec));
}

Dialect argmax_dialect(const Instance& instance) {
  if (!instance.dialect) {
    throw DataError("instance '" + instance.id + "' has no dialect probabilities");
  }
  std::size_t best = 0;
  for (std::size_t d = 1; d < 4; ++d) {
    if (instance.dialect->p[d] > instance.dialect->p[best]) best = d;
  }
  return static_cast<Dialect>(best);
}

int label_value(const Instance& instance) {
  switch (instance.label) {
    case Label::toxic: return 1;
    case Label::nontoxic: return 0;
    default: throw DataError("instance '" + instance.id + "' is unlabeled");
  }
}

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.provenance = dataset.provenance;
  out.split_name = dataset.split_name;
  out.instances.reserve(indices.size());
  for (std::size_t i : indices) out.instances.push_back(dataset.instances.at(i));
  return out;
}

}  // namespace toxdebias
