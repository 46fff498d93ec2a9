#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "entlink/rng.hpp"
#include "entlink/tagio.hpp"

using namespace entlink;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("entlink_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

montecarlo::TagStream random_stream(std::uint64_t seed, int n) {
    rng::Stream rand(seed);
    montecarlo::TagStream s;
    std::int64_t t = 0;
    for (int i = 0; i < n; ++i) {
        t += 1 + static_cast<std::int64_t>(rand.uniform() * 5000);
        s.tags.push_back({t, static_cast<std::uint16_t>(rand.next_u64() % 512)});
    }
    return s;
}

} // namespace

TEST_CASE("binary tag files round-trip exactly") {
    TempDir dir;
    for (int n : {0, 1, 777, 10000}) {
        auto path = dir.path / ("tags_" + std::to_string(n) + ".ettag");
        auto stream = random_stream(100 + n, n);
        tagio::write_tags(path, stream);
        REQUIRE(fs::file_size(path) == tagio::kHeaderBytes + tagio::kRecordBytes * n);
        auto back = tagio::read_tags(path);
        REQUIRE(back.tags.size() == stream.tags.size());
        for (std::size_t i = 0; i < stream.tags.size(); ++i) {
            REQUIRE(back.tags[i].time_ps == stream.tags[i].time_ps);
            REQUIRE(back.tags[i].detector == stream.tags[i].detector);
        }
    }
}

TEST_CASE("the header carries the magic, version and record count") {
    TempDir dir;
    auto path = dir.path / "t.ettag";
    tagio::write_tags(path, random_stream(1, 3));
    std::ifstream in(path, std::ios::binary);
    char head[16];
    in.read(head, 16);
    REQUIRE(std::string(head, 8) == "ENTTAG01");
    REQUIRE(static_cast<unsigned char>(head[8]) == 1); // version LE
    REQUIRE(static_cast<unsigned char>(head[12]) == 3); // count LE
}

TEST_CASE("malformed tag files raise TagFormatError") {
    TempDir dir;

    SECTION("bad magic") {
        auto path = dir.path / "bad_magic.ettag";
        std::ofstream(path, std::ios::binary) << "NOTATAG1" << std::string(8, '\0');
        REQUIRE_THROWS_AS(tagio::read_tags(path), tagio::TagFormatError);
    }
    SECTION("truncated header") {
        auto path = dir.path / "short.ettag";
        std::ofstream(path, std::ios::binary) << "ENT";
        REQUIRE_THROWS_AS(tagio::read_tags(path), tagio::TagFormatError);
    }
    SECTION("record count mismatch") {
        auto path = dir.path / "count.ettag";
        tagio::write_tags(path, random_stream(2, 5));
        auto size = fs::file_size(path);
        fs::resize_file(path, size - 7);
        REQUIRE_THROWS_AS(tagio::read_tags(path), tagio::TagFormatError);
    }
    SECTION("missing file is an I/O error, not a format error") {
        REQUIRE_THROWS_AS(tagio::read_tags(dir.path / "absent.ettag"), std::runtime_error);
    }
}

TEST_CASE("csv export lists detector and picosecond time") {
    TempDir dir;
    montecarlo::TagStream s;
    s.tags = {{100, 7}, {250, 263}};
    auto path = dir.path / "tags.csv";
    tagio::write_tags_csv(path, s);
    std::ifstream in(path);
    std::string l0, l1, l2;
    std::getline(in, l0);
    std::getline(in, l1);
    std::getline(in, l2);
    REQUIRE(l0 == "detector,time_ps");
    REQUIRE(l1 == "7,100");
    REQUIRE(l2 == "263,250");
}

TEST_CASE("split_by_detector keeps per-detector order and truth") {
    montecarlo::TagStream merged;
    merged.tags = {{10, 1}, {20, 2}, {30, 1}, {40, 2}};
    merged.origins = {5, montecarlo::kDarkOrigin, 6, 7};
    auto split = tagio::split_by_detector(merged);
    REQUIRE(split.size() == 2);
    REQUIRE(split[1].tags.size() == 2);
    REQUIRE(split[1].origins == std::vector<std::int64_t>{5, 6});
    REQUIRE(split[2].tags[1].time_ps == 40);
    REQUIRE(split[2].origins == std::vector<std::int64_t>{montecarlo::kDarkOrigin, 7});
}

TEST_CASE("json helpers round-trip") {
    TempDir dir;
    nlohmann::ordered_json j{{"alpha", 1}, {"beta", {1, 2, 3}}};
    auto path = dir.path / "x.json";
    tagio::write_json(path, j);
    auto back = tagio::read_json(path);
    REQUIRE(back["alpha"] == 1);
    REQUIRE(back["beta"].size() == 3);
}
