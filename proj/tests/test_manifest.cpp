#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "folioseg/manifest.hpp"
#include "folioseg/synthetic.hpp"

using namespace folioseg;

namespace {

DatasetManifest parse(const std::string& text) {
  std::istringstream in(text);
  return parse_manifest(in, "/data");
}

const char* five_classes =
    "name demo\n"
    "class 1 ff0000 text\n"
    "class 2 00ff00 marginalia\n"
    "class 3 0000ff heading\n"
    "class 4 ffff00 initial\n"
    "class 5 00ffff figure  # trailing comment\n";

}  // namespace

TEST(Manifest, ParsesRecordsAndClasses) {
  const auto m = parse(std::string(five_classes) +
                       "record a.pgm a_gt.ppm train\n"
                       "record sub/b.pgm sub/b_gt.ppm test\n");
  EXPECT_EQ(m.name, "demo");
  EXPECT_EQ(m.class_count(), 5);
  ASSERT_EQ(m.records.size(), 2u);
  EXPECT_EQ(m.records[1].image, std::filesystem::path("/data/sub/b.pgm"));
  EXPECT_EQ(m.records[0].split, Split::train);
  EXPECT_TRUE(m.fully_tagged());
  EXPECT_EQ(m.classes.color_of(5).b, 255);
}

TEST(Manifest, UntaggedRecords) {
  const auto m = parse(std::string(five_classes) + "record a.pgm a_gt.ppm\n");
  EXPECT_EQ(m.records[0].split, Split::unsplit);
  EXPECT_FALSE(m.fully_tagged());
}

TEST(Manifest, SharedColorRejected) {
  EXPECT_THROW(parse("class 1 ff0000 a\nclass 2 ff0000 b\nrecord a b\n"), DataError);
}

TEST(Manifest, EmptyRecordsRejected) { EXPECT_THROW(parse(five_classes), DataError); }

TEST(Manifest, ErrorsCarryLineNumbers) {
  try {
    parse("class 1 ff0000 a\n\nrecord a.pgm a.ppm validation\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse("klass 1 ff0000 a\n"), DataError);
  EXPECT_THROW(parse("class x ff0000 a\nrecord a b\n"), DataError);
  EXPECT_THROW(parse("class 1 ff00 a\nrecord a b\n"), DataError);
  EXPECT_THROW(parse("class 1 ff0000 a\nrecord a b\nrecord a c\n"), DataError);
  EXPECT_THROW(parse("class 1 ff0000 a\nclass 1 00ff00 b\nrecord a b\n"), DataError);
}

TEST(Manifest, LoadWriteRoundTripAndPathCheck) {
  const auto dir = std::filesystem::temp_directory_path() / "folioseg_manifest_rt";
  std::filesystem::remove_all(dir);
  const auto path = write_synthetic_dataset(dir, 3, 16, 24, 9, 2);
  const auto m = load_manifest(path);
  EXPECT_EQ(m.records.size(), 3u);
  EXPECT_EQ(m.records[2].split, Split::test);
  EXPECT_NO_THROW(check_manifest_paths(m));

  std::ostringstream out;
  write_manifest(out, m, dir);
  std::istringstream in(out.str());
  const auto again = parse_manifest(in, dir);
  ASSERT_EQ(again.records.size(), m.records.size());
  for (size_t i = 0; i < m.records.size(); ++i) {
    EXPECT_EQ(again.records[i].image, m.records[i].image);
    EXPECT_EQ(again.records[i].split, m.records[i].split);
  }

  std::filesystem::remove(m.records[1].ground_truth);
  EXPECT_THROW(check_manifest_paths(m), DataError);
  EXPECT_THROW(load_manifest(dir / "nope.txt"), DataError);
}
