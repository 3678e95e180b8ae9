#include <doctest.h>

#include <filesystem>
#include <random>

#include "fixtures.hpp"
#include "hardhat/coco_io.hpp"
#include "hardhat/compliance.hpp"
#include "hardhat/error.hpp"
#include "hardhat/file_util.hpp"

using namespace hardhat;

namespace {

const char* kMinimal = R"({
  "images": [{"id": 1, "width": 640, "height": 480, "file_name": "a.jpg"}],
  "categories": [{"id": 1, "name": "person"}, {"id": 2, "name": "hard_hat"}],
  "annotations": [{"id": 7, "image_id": 1, "category_id": 1, "bbox": [10, 20, 30, 40],
                   "keypoints": [25, 25, 2], "iscrowd": 0}]
})";

std::vector<Instance> random_instances(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Instance> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool is_person = unit(rng) < 0.6;
    Instance inst = fixtures::make(static_cast<std::int64_t>(i + 1), 1 + static_cast<std::int64_t>(unit(rng) * 5),
                                   is_person ? fixtures::kPerson : fixtures::kHat, fixtures::random_box(rng),
                                   unit(rng));
    if (is_person && unit(rng) < 0.7) {
      inst.head_keypoint = Keypoint{unit(rng) * 640, unit(rng) * 480, unit(rng) < 0.3 ? 1 : 2};
    }
    inst.ignore = unit(rng) < 0.1;
    out.push_back(inst);
  }
  return out;
}

}  // namespace

TEST_CASE("minimal ground-truth file loads one instance") {
  const Dataset d = parse_ground_truth(kMinimal);
  REQUIRE(d.instances.size() == 1);
  const Instance& p = d.instances[0];
  CHECK(p.id == 7);
  CHECK(p.category.kind == CategoryKind::person);
  CHECK(p.bbox == BBox{10, 20, 30, 40});
  REQUIRE(p.has_head_keypoint());
  CHECK(p.head_keypoint->x == 25);
  CHECK_FALSE(p.ignore);
  CHECK_FALSE(p.is_detection());
}

TEST_CASE("dangling image id is an integrity error") {
  std::string text = kMinimal;
  text.replace(text.find("\"image_id\": 1"), 13, "\"image_id\": 9");
  CHECK_THROWS_AS(parse_ground_truth(text), IntegrityError);
}

TEST_CASE("malformed ground truth is a parse error naming the record") {
  CHECK_THROWS_AS(parse_ground_truth("{"), ParseError);
  std::string text = kMinimal;
  text.replace(text.find("[10, 20, 30, 40]"), 16, "[10, 20, 30]");
  try {
    parse_ground_truth(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("annotations[0]") != std::string::npos);
  }
}

TEST_CASE("crowd annotations load as ignored regions") {
  std::string text = kMinimal;
  text.replace(text.find("\"iscrowd\": 0"), 12, "\"iscrowd\": 1");
  CHECK(parse_ground_truth(text).instances[0].ignore);
}

TEST_CASE("detections: empty list, bad score, unknown category") {
  const Dataset d = parse_ground_truth(kMinimal);
  CHECK(parse_detections("[]", d).empty());
  CHECK_THROWS_AS(parse_detections(R"([{"image_id":1,"category_id":1,"bbox":[0,0,1,1],"score":1.5}])", d),
                  ValidationError);
  CHECK_THROWS_AS(parse_detections(R"([{"image_id":1,"category_id":9,"bbox":[0,0,1,1],"score":0.5}])", d),
                  IntegrityError);
  CHECK_THROWS_AS(parse_detections(R"([{"image_id":4,"category_id":1,"bbox":[0,0,1,1],"score":0.5}])", d),
                  IntegrityError);
}

TEST_CASE("detections without ids are numbered in file order") {
  const Dataset d = parse_ground_truth(kMinimal);
  const auto dets = parse_detections(
      R"([{"image_id":1,"category_id":1,"bbox":[0,0,1,1],"score":0.5},
          {"image_id":1,"category_id":2,"bbox":[1,1,2,2],"score":0.25},
          {"image_id":1,"category_id":1,"bbox":[2,2,3,3],"score":1.0,"keypoints":[3,3,2]}])",
      d);
  REQUIRE(dets.size() == 3);
  CHECK(dets[0].id == 1);
  CHECK(dets[2].id == 3);
  CHECK(dets[1].category.kind == CategoryKind::hard_hat);
  CHECK(dets[2].has_head_keypoint());
  CHECK(parse_detections(serialize_instances(dets), d) == dets);
}

TEST_CASE("1000 random instances round-trip field-identical") {
  const Dataset d = fixtures::dataset({}, 5);
  const auto instances = random_instances(1000, 42);
  CHECK(parse_detections(serialize_instances(instances), d) == instances);
}

TEST_CASE("empty instance list writes an empty list") {
  CHECK(parse_detections(serialize_instances({}), fixtures::dataset({})).empty());
  CHECK(serialize_instances({}).rfind("[]", 0) == 0);
}

TEST_CASE("dataset writer is the inverse of the loader") {
  Dataset d = parse_ground_truth(kMinimal);
  d.instances.push_back(fixtures::hat(8, 1, BBox{20, 20, 10, 5}));
  const Dataset back = parse_ground_truth(serialize_dataset(d));
  CHECK(back.images == d.images);
  CHECK(back.categories == d.categories);
  CHECK(back.instances == d.instances);
}

TEST_CASE("derived instances are written with derived category ids") {
  Dataset d = parse_ground_truth(kMinimal);
  d.instances.push_back(fixtures::hat(8, 1, BBox{20, 20, 10, 5}));
  const DerivedCategories cats = ensure_derived_categories(d);
  auto dets = fixtures::as_detections(d, 0.9);
  const auto derived = verdicts_to_instances(classify_by_image(dets), false, cats);
  const auto back = parse_detections(serialize_instances(derived), d);
  REQUIRE(back.size() == 1);
  CHECK(back[0].category == cats.wearer);
}

TEST_CASE("files are written atomically and read back") {
  const auto dir = std::filesystem::temp_directory_path() / "hardhat_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "d.json";
  const Dataset d = parse_ground_truth(kMinimal);
  write_dataset(d, path);
  CHECK_FALSE(std::filesystem::exists(dir / "d.json.tmp"));
  CHECK(load_ground_truth(path).instances == d.instances);
  CHECK_THROWS_AS(load_ground_truth(dir / "missing.json"), IoError);
  CHECK_THROWS_AS(write_file_atomic(dir / "no" / "such" / "x.json", "x"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("stats: empty dataset is all zeros") {
  const StatsReport r = dataset_stats(fixtures::dataset({}));
  REQUIRE_FALSE(r.rows.empty());
  for (const StatsRow& row : r.rows) {
    for (auto c : row.counts) CHECK(c == 0);
  }
}

TEST_CASE("stats: one wearing person and one hat") {
  const Dataset d = fixtures::dataset({fixtures::person(1, 1, BBox{0, 0, 50, 100}, Keypoint{25, 10, 2}),
                                       fixtures::hat(2, 1, BBox{15, 2, 20, 16})});
  const StatsReport r = dataset_stats(d);
  CHECK(r.find("person", "all")->count(BucketColumn::all) == 1);
  CHECK(r.find("person", "all")->count(BucketColumn::medium) == 1);
  CHECK(r.find("person", "with_head_keypoint")->count(BucketColumn::all) == 1);
  CHECK(r.find("person", "with_head_keypoint_wearing")->count(BucketColumn::all) == 1);
  CHECK(r.find("hard_hat", "all")->count(BucketColumn::small) == 1);
  CHECK(r.to_csv().rfind("category,subgroup,all,small,medium,large\n", 0) == 0);
}

TEST_CASE("stats rows are internally consistent on random datasets") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Instance> inst;
    const int n = 1 + static_cast<int>(unit(rng) * 30);
    for (int i = 1; i <= n; ++i) {
      const std::int64_t img = 1 + static_cast<std::int64_t>(unit(rng) * 3);
      const BBox box = fixtures::random_box(rng, 150);
      if (unit(rng) < 0.5) {
        std::optional<Keypoint> kp;
        if (unit(rng) < 0.7) kp = Keypoint{box.x + unit(rng) * box.w, box.y + unit(rng) * box.h, 2};
        inst.push_back(fixtures::person(i, img, box, kp));
      } else {
        inst.push_back(fixtures::hat(i, img, box));
      }
    }
    const StatsReport r = dataset_stats(fixtures::dataset(inst, 3));
    for (const StatsRow& row : r.rows) CHECK(row.counts[0] == row.counts[1] + row.counts[2] + row.counts[3]);
    const auto* all = r.find("person", "all");
    const auto* kp = r.find("person", "with_head_keypoint");
    const auto* wearing = r.find("person", "with_head_keypoint_wearing");
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(kp->counts[c] <= all->counts[c]);
      CHECK(wearing->counts[c] <= kp->counts[c]);
    }
  }
}
