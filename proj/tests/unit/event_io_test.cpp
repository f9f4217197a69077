#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "pcarect/error.hpp"
#include "pcarect/event_io.hpp"

namespace pcarect {
namespace {

TEST(ParseCsv, TwoEventsAtOnePixel) {
  const auto s = parse_csv("3,4,100,1\n3,4,250,0", SensorGeometry{});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.events[0], (Event{3, 4, 100, true}));
  EXPECT_EQ(s.events[1], (Event{3, 4, 250, false}));
}

TEST(ParseCsv, TimestampRegressionReportsLine) {
  try {
    parse_csv("3,4,250,1\n3,4,100,0", SensorGeometry{});
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("regression"), std::string::npos);
  }
}

TEST(ParseCsv, OutOfBounds) {
  try {
    parse_csv("300,4,100,1", SensorGeometry{180, 240});
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  EXPECT_THROW(parse_csv("3,180,100,1", SensorGeometry{180, 240}), ParseError);
  EXPECT_THROW(parse_csv("-1,4,100,1", SensorGeometry{}), ParseError);
}

TEST(ParseCsv, MalformedLines) {
  EXPECT_THROW(parse_csv("3,4,100", SensorGeometry{}), ParseError);
  EXPECT_THROW(parse_csv("3,4,100,1,7", SensorGeometry{}), ParseError);
  EXPECT_THROW(parse_csv("a,4,100,1", SensorGeometry{}), ParseError);
  EXPECT_THROW(parse_csv("3,4,100,2", SensorGeometry{}), ParseError);
  try {
    parse_csv("1,1,1,1\n\n2,2,x,0\n", SensorGeometry{});
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(ParseCsv, BlankLinesAndCrlf) {
  const auto s = parse_csv("\n1,2,3,0\r\n\n4,5,6,1\r\n", SensorGeometry{});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.events[1], (Event{4, 5, 6, true}));
}

TEST(ParseCsv, RoundTrip) {
  std::mt19937_64 rng(7);
  EventStream s;
  std::uint64_t t = 0;
  for (int i = 0; i < 500; ++i) {
    t += rng() % 50;
    s.events.push_back(Event{static_cast<std::uint16_t>(rng() % 240), static_cast<std::uint16_t>(rng() % 180), t,
                             (rng() & 1) != 0});
  }
  const std::string text = write_csv(s);
  const auto back = parse_csv(text, SensorGeometry{});
  EXPECT_EQ(back.events, s.events);
  EXPECT_EQ(write_csv(back), text);
}

TEST(Nmnist, DecodesBitFields) {
  const std::vector<std::uint8_t> bytes{0x05, 0x07, 0x80, 0x00, 0x64};
  const auto s = parse_nmnist_bin(bytes);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.events[0], (Event{5, 7, 100, true}));
  EXPECT_EQ(s.geometry, kNmnistGeometry);
}

TEST(Nmnist, AllZeroRecord) {
  const std::vector<std::uint8_t> bytes(5, 0);
  EXPECT_EQ(parse_nmnist_bin(bytes).events[0], (Event{0, 0, 0, false}));
}

TEST(Nmnist, TruncatedRecord) {
  const std::vector<std::uint8_t> bytes(7, 0);
  EXPECT_THROW(parse_nmnist_bin(bytes), ParseError);
}

TEST(Nmnist, RegressionRejected) {
  const std::vector<std::uint8_t> bytes{1, 1, 0, 0, 9, 1, 1, 0, 0, 8};
  EXPECT_THROW(parse_nmnist_bin(bytes), ParseError);
}

TEST(Nmnist, TimestampsFitIn23Bits) {
  std::mt19937_64 rng(3);
  std::vector<std::uint32_t> ts(2000);
  for (auto& t : ts) t = static_cast<std::uint32_t>(rng() & 0x7FFFFF);
  std::sort(ts.begin(), ts.end());
  std::vector<std::uint8_t> bytes;
  for (auto t : ts) {
    const bool p = (rng() & 1) != 0;
    bytes.push_back(static_cast<std::uint8_t>(rng() % 34));
    bytes.push_back(static_cast<std::uint8_t>(rng() % 34));
    bytes.push_back(static_cast<std::uint8_t>((p ? 0x80 : 0) | (t >> 16)));
    bytes.push_back(static_cast<std::uint8_t>(t >> 8));
    bytes.push_back(static_cast<std::uint8_t>(t));
  }
  const auto s = parse_nmnist_bin(bytes);
  ASSERT_EQ(s.size(), ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    EXPECT_LT(s.events[i].t, 1u << 23);
    EXPECT_EQ(s.events[i].t, ts[i]);
  }
}

TEST(GroundTruth, RoundTripAndErrors) {
  const std::vector<GroundTruthBox> boxes{{0, 999, 10, 20, 30, 40}, {1000, 1999, 11, 21, 31, 41}};
  EXPECT_EQ(parse_ground_truth_csv(write_ground_truth_csv(boxes)), boxes);
  EXPECT_THROW(parse_ground_truth_csv("0,10,5,5,4,5"), ParseError);
  EXPECT_THROW(parse_ground_truth_csv("0,10,5,5"), ParseError);
  EXPECT_TRUE(boxes[0].covers(999));
  EXPECT_FALSE(boxes[0].covers(1000));
  EXPECT_TRUE(boxes[0].contains(30, 40));
  EXPECT_FALSE(boxes[0].contains(31, 40));
}

TEST(LoadEvents, DispatchesOnExtension) {
  const auto dir = std::filesystem::temp_directory_path() / "pcarect_event_io_test";
  std::filesystem::create_directories(dir);
  const std::vector<std::uint8_t> rec{0x05, 0x07, 0x80, 0x00, 0x64};
  write_text_file(dir / "a.bin", std::string(rec.begin(), rec.end()));
  write_text_file(dir / "a.csv", "1,2,3,0\n");
  EXPECT_EQ(load_events(dir / "a.bin", SensorGeometry{}).geometry, kNmnistGeometry);
  EXPECT_EQ(load_events(dir / "a.csv", SensorGeometry{}).size(), 1u);
  write_text_file(dir / "bad.csv", "1,2,3,0\n1,2,1,0\n");
  try {
    load_events(dir / "bad.csv", SensorGeometry{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("bad.csv"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(load_events(dir / "missing.csv", SensorGeometry{}), Error);
  std::filesystem::remove_all(dir);
}

TEST(Geometry, Validation) {
  EXPECT_THROW((SensorGeometry{0, 10}).validate(), ConfigError);
  EXPECT_NO_THROW((SensorGeometry{1, 1}).validate());
  EXPECT_EQ((SensorGeometry{}).pixel_count(), 180u * 240u);
}

}  // namespace
}  // namespace pcarect
