#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hardhat/geometry.hpp"

namespace hardhat {

struct ImageInfo {
  std::int64_t id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;

  friend bool operator==(const ImageInfo&, const ImageInfo&) = default;
};

// A COCO-style annotation set. Every instance references a listed image and
// category; instance ids are unique; category names are unique.
struct Dataset {
  std::vector<ImageInfo> images;
  std::vector<Category> categories;
  std::vector<Instance> instances;

  const Category* find_category(std::int64_t id) const noexcept;
  const Category* find_category(CategoryKind kind) const noexcept;
  bool has_image(std::int64_t id) const noexcept;

  // Returns the category of that kind, appending it with the next free id when
  // absent.
  Category ensure_category(CategoryKind kind);

  // Throws IntegrityError when a reference dangles or an id repeats.
  void validate() const;
};

// Loads ground truth. Records flagged iscrowd load with ignore = true. Person
// instances take their head keypoint from the first [x, y, v] triplet when
// v > 0. Throws ParseError, ValidationError, IntegrityError or IoError.
Dataset load_ground_truth(const std::filesystem::path& path);
Dataset parse_ground_truth(const std::string& json_text);

// Loads a COCO results list against `dataset`. Order is preserved; records
// without an "id" are numbered from 1 in file order.
std::vector<Instance> load_detections(const std::filesystem::path& path, const Dataset& dataset);
std::vector<Instance> parse_detections(const std::string& json_text, const Dataset& dataset);

// Results-format writer; output re-loads field-identical via load_detections.
std::string serialize_instances(const std::vector<Instance>& instances);
void write_instances(const std::vector<Instance>& instances, const std::filesystem::path& path);

// Full annotation-file writer, the inverse of load_ground_truth.
std::string serialize_dataset(const Dataset& dataset);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

enum class BucketColumn : std::size_t { all = 0, small = 1, medium = 2, large = 3 };

struct StatsRow {
  std::string category;
  std::string subgroup;  // "all", "with_head_keypoint" or "with_head_keypoint_wearing"
  std::array<std::int64_t, 4> counts{};  // all, small, medium, large

  std::int64_t count(BucketColumn c) const { return counts[static_cast<std::size_t>(c)]; }
};

struct StatsReport {
  std::vector<StatsRow> rows;

  const StatsRow* find(std::string_view category, std::string_view subgroup) const noexcept;
  std::string to_csv() const;
};

// Instance counts per category and area bucket, plus the person subgroups
// "with head keypoint" and "with head keypoint inside some hard-hat box".
// Crowd regions are not counted.
StatsReport dataset_stats(const Dataset& dataset);

}  // namespace hardhat
