#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "toxdebias/corpus.hpp"
#include "toxdebias/filters.hpp"
#include "toxdebias/probe.hpp"

namespace toxdebias {

// Training-dynamics coordinates of one instance over E epochs.
struct MapCoordinates {
  std::string id;
  double confidence = 0.0;   // mean prob_gold
  double variability = 0.0;  // population standard deviation of prob_gold
  double correctness = 0.0;  // fraction of epochs predicted correctly
};

// Instances appear in order of first occurrence in the log. Every instance
// needs an entry for each epoch 1..E with E >= 2 the largest epoch logged;
// otherwise DataError. Confidence and variability are rounded to 12 decimal
// places.
std::vector<MapCoordinates> compute_coordinates(const DynamicsLog& log);

enum class Region { easy, ambiguous, hard };
std::string_view to_string(Region region);
std::optional<Region> parse_region(std::string_view s);

// Selects round(target_fraction * N) instances (per class when preserving
// label proportions):
//   hard:      lowest confidence
//   ambiguous: highest variability
//   easy:      highest confidence, then lowest variability
// Exact ties on the region keys are broken by a seeded permutation.
FilterManifest select_region(const std::vector<MapCoordinates>& coords, const Dataset& dataset,
                             Region region, double target_fraction,
                             bool preserve_label_proportions, std::uint64_t seed);

std::string coordinates_to_tsv(const std::vector<MapCoordinates>& coords);
std::vector<MapCoordinates> parse_coordinates_tsv(std::string_view content);
void save_coordinates(const std::vector<MapCoordinates>& coords, const std::filesystem::path& path);
std::vector<MapCoordinates> load_coordinates(const std::filesystem::path& path);

}  // namespace toxdebias
