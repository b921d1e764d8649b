#include "toxdebias/cartography.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "toxdebias/errors.hpp"
#include "toxdebias/rng.hpp"
#include "toxdebias/text_io.hpp"

namespace toxdebias {

namespace {

// Coordinates are reported to 12 decimal places, so e.g. the spread of
// {0.2, 0.8} is the double nearest 0.3 rather than the one above it.
double round_coordinate(double v) { return std::round(v * 1e12) / 1e12; }

}  // namespace

std::vector<MapCoordinates> compute_coordinates(const DynamicsLog& log) {
  int epochs = 0;
  for (const auto& r : log) {
    if (r.epoch < 1) throw DataError("dynamics record for '" + r.id + "' has epoch < 1");
    epochs = std::max(epochs, r.epoch);
  }
  if (epochs < 2) throw DataError("training dynamics need at least 2 epochs");

  struct Track {
    std::vector<double> prob;
    std::vector<char> correct;
    std::vector<char> seen;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Track> tracks;
  for (const auto& r : log) {
    auto [it, inserted] = tracks.try_emplace(r.id);
    if (inserted) {
      order.push_back(r.id);
      it->second.prob.assign(epochs, 0.0);
      it->second.correct.assign(epochs, 0);
      it->second.seen.assign(epochs, 0);
    }
    auto& t = it->second;
    const auto e = static_cast<std::size_t>(r.epoch - 1);
    if (t.seen[e]) {
      throw DataError("instance '" + r.id + "' has two records for epoch " + std::to_string(r.epoch));
    }
    t.seen[e] = 1;
    t.prob[e] = r.prob_gold;
    t.correct[e] = r.correct ? 1 : 0;
  }

  std::vector<MapCoordinates> out;
  out.reserve(order.size());
  for (const auto& id : order) {
    const auto& t = tracks.at(id);
    for (int e = 0; e < epochs; ++e) {
      if (!t.seen[e]) {
        throw DataError("instance '" + id + "' is missing epoch " + std::to_string(e + 1));
      }
    }
    // Summing in sorted order makes the result independent of epoch order.
    std::vector<double> p = t.prob;
    std::sort(p.begin(), p.end());
    const double n = static_cast<double>(epochs);
    const double mean = std::accumulate(p.begin(), p.end(), 0.0) / n;
    std::vector<double> sq(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) sq[k] = (p[k] - mean) * (p[k] - mean);
    std::sort(sq.begin(), sq.end());
    const double var = std::accumulate(sq.begin(), sq.end(), 0.0) / n;
    MapCoordinates c;
    c.id = id;
    c.confidence = round_coordinate(mean);
    c.variability = round_coordinate(std::sqrt(var));
    c.correctness =
        static_cast<double>(std::count(t.correct.begin(), t.correct.end(), 1)) / n;
    out.push_back(std::move(c));
  }
  return out;
}

std::string_view to_string(Region region) {
  switch (region) {
    case Region::easy: return "easy";
    case Region::ambiguous: return "ambiguous";
    case Region::hard: return "hard";
  }
  return "?";
}

std::optional<Region> parse_region(std::string_view s) {
  const std::string lower = ascii_lower(s);
  if (lower == "easy") return Region::easy;
  if (lower == "ambiguous") return Region::ambiguous;
  if (lower == "hard") return Region::hard;
  return std::nullopt;
}

namespace {

// True when a should be selected before b, ignoring ties.
bool region_before(Region region, const MapCoordinates& a, const MapCoordinates& b) {
  switch (region) {
    case Region::hard: return a.confidence < b.confidence;
    case Region::ambiguous: return a.variability > b.variability;
    case Region::easy:
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      return a.variability < b.variability;
  }
  return false;
}

}  // namespace

FilterManifest select_region(const std::vector<MapCoordinates>& coords, const Dataset& dataset,
                             Region region, double target_fraction,
                             bool preserve_label_proportions, std::uint64_t seed) {
  if (!(target_fraction > 0.0 && target_fraction <= 1.0)) {
    throw UsageError("region fraction must be in (0, 1]");
  }
  std::unordered_map<std::string, const MapCoordinates*> by_id;
  for (const auto& c : coords) by_id.emplace(c.id, &c);
  const std::size_t n = dataset.size();
  std::vector<const MapCoordinates*> rows(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto it = by_id.find(dataset[i].id);
    if (it == by_id.end()) {
      throw DataError("no coordinates for instance '" + dataset[i].id + "'");
    }
    rows[i] = it->second;
  }

  std::vector<std::size_t> tie_rank(n);
  {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, 0x52454749ULL));  // "REGI"
    rng.shuffle(std::span(perm));
    for (std::size_t k = 0; k < n; ++k) tie_rank[perm[k]] = k;
  }
  auto before = [&](std::size_t a, std::size_t b) {
    if (region_before(region, *rows[a], *rows[b])) return true;
    if (region_before(region, *rows[b], *rows[a])) return false;
    return tie_rank[a] < tie_rank[b];
  };

  std::vector<std::size_t> kept;
  if (preserve_label_proportions) {
    const auto quotas = class_quotas(dataset, target_fraction);
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[label_value(dataset[i])].push_back(i);
    for (int c = 0; c < 2; ++c) {
      auto& v = by_class[c];
      std::sort(v.begin(), v.end(), before);
      kept.insert(kept.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(quotas[c]));
    }
  } else {
    const auto target =
        static_cast<std::size_t>(std::llround(target_fraction * static_cast<double>(n)));
    if (target == 0) throw DataError("region fraction selects no instances");
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::sort(all.begin(), all.end(), before);
    kept.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(target));
  }
  std::sort(kept.begin(), kept.end());

  FilterManifest m = manifest_from_indices(dataset, kept, "datamaps-" + std::string(to_string(region)));
  double conf = 0.0, var = 0.0;
  for (std::size_t i : kept) {
    conf += rows[i]->confidence;
    var += rows[i]->variability;
  }
  const double k = static_cast<double>(kept.size());
  m.config = {{"region", to_string(region)},
              {"target_fraction", target_fraction},
              {"preserve_label_proportions", preserve_label_proportions},
              {"seed", seed},
              {"selected_mean_confidence", conf / k},
              {"selected_mean_variability", var / k}};
  return m;
}

std::string coordinates_to_tsv(const std::vector<MapCoordinates>& coords) {
  std::string out = "id\tconfidence\tvariability\tcorrectness\n";
  for (const auto& c : coords) {
    out += escape_tsv(c.id);
    out += '\t';
    out += format_real(c.confidence);
    out += '\t';
    out += format_real(c.variability);
    out += '\t';
    out += format_real(c.correctness);
    out += '\n';
  }
  return out;
}

std::vector<MapCoordinates> parse_coordinates_tsv(std::string_view content) {
  const auto lines = split_lines(content);
  if (lines.empty() || lines[0] != "id\tconfidence\tvariability\tcorrectness") {
    throw DataError("coordinates file: missing header");
  }
  std::vector<MapCoordinates> out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto f = split_tsv_row(lines[ln]);
    if (f.size() != 4) {
      throw DataError("coordinates file line " + std::to_string(ln + 1) + ": expected 4 fields");
    }
    MapCoordinates c;
    c.id = unescape_tsv(f[0]);
    try {
      c.confidence = std::stod(f[1]);
      c.variability = std::stod(f[2]);
      c.correctness = std::stod(f[3]);
    } catch (const std::exception&) {
      throw DataError("coordinates file line " + std::to_string(ln + 1) + ": bad number");
    }
    out.push_back(std::move(c));
  }
  return out;
}

void save_coordinates(const std::vector<MapCoordinates>& coords, const std::filesystem::path& path) {
  write_file(path, coordinates_to_tsv(coords));
}

std::vector<MapCoordinates> load_coordinates(const std::filesystem::path& path) {
  return parse_coordinates_tsv(read_file(path));
}

}  // namespace toxdebias
