#include <doctest.h>

#include "synthmix/csv.hpp"
#include "synthmix/error.hpp"
#include "synthmix/hash.hpp"
#include "synthmix/json_io.hpp"
#include "synthmix/rng.hpp"
#include "synthmix/text.hpp"

#include "helpers.hpp"

#include <set>

using namespace synthmix;

TEST_CASE("sha256 matches the FIPS 180-2 vector") {
    CHECK(hash::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(hash::sha256_u64("abc") == 0xba7816bf8f01cfeaULL);
}

TEST_CASE("murmur3 x86_32 reference values") {
    CHECK(hash::murmur3_32("", 0) == 0u);
    CHECK(hash::murmur3_32("", 1) == 0x514E28B7u);
    CHECK(hash::murmur3_32("hello", 0) == 0x248BFA47u);
    CHECK(hash::murmur3_32("The quick brown fox jumps over the lazy dog", 0) == 0x2E4FF723u);
}

TEST_CASE("rng engine follows the standard mt19937_64 sequence") {
    Rng rng(5489);
    std::uint64_t v = 0;
    for (int i = 0; i < 10000; ++i) v = rng.next_u64();
    CHECK(v == 9981545732273789042ULL);
}

TEST_CASE("rng forks do not depend on consumed draws") {
    Rng a(9), b(9);
    for (int i = 0; i < 17; ++i) b.next_u64();
    auto fa = a.fork("x"), fb = b.fork("x");
    CHECK(fa.next_u64() == fb.next_u64());
    CHECK(a.fork("x").next_u64() != a.fork("y").next_u64());
}

TEST_CASE("derive_seed is stable and coordinate sensitive") {
    CHECK(derive_seed(1, "a/b") == derive_seed(1, "a/b"));
    CHECK(derive_seed(1, "a/b") != derive_seed(2, "a/b"));
    CHECK(derive_seed(1, "a/b") == hash::sha256_u64("1|a/b"));
}

TEST_CASE("sample_indices draws distinct indices and nests prefixes") {
    Rng r1(3), r2(3);
    const auto small = r1.sample_indices(50, 10);
    const auto large = r2.sample_indices(50, 30);
    CHECK(std::set<size_t>(large.begin(), large.end()).size() == 30);
    CHECK(std::equal(small.begin(), small.end(), large.begin()));
    Rng r3(1);
    CHECK_THROWS(r3.sample_indices(3, 4));
}

TEST_CASE("uniform_index stays in range") {
    Rng r(11);
    for (int i = 0; i < 1000; ++i) CHECK(r.uniform_index(7) < 7u);
}

TEST_CASE("nfc and case folding") {
    // e + combining acute -> precomposed
    CHECK(text::nfc("e\xCC\x81") == "\xC3\xA9");
    CHECK_THROWS_AS(text::nfc("\xFF\xFE"), SchemaError);
    CHECK(text::fold_case("STRASSE") == "strasse");
    CHECK(text::fold_case("Stra\xC3\x9F" "e") == "strasse");
}

TEST_CASE("word tokens keep inner hyphens and apostrophes") {
    CHECK(text::words("Non-sexist tweets, aren't they?") ==
          std::vector<std::string>{"Non-sexist", "tweets", "aren't", "they"});
    CHECK(text::words("--a- b'") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("squeeze_space and trim") {
    CHECK(text::squeeze_space("  a \t\n b  ") == "a b");
    CHECK(text::trim("  x ") == "x");
    CHECK(text::is_blank(" \t\n"));
}

TEST_CASE("csv round trip with quotes and newlines") {
    const csv::Row row{"a", "b,c", "say \"hi\"", "two\nlines", ""};
    const auto parsed = csv::parse(csv::format_row(row));
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0] == row);
    CHECK(csv::parse("x,y\r\n1,2\r\n").size() == 2);
}

TEST_CASE("atomic write leaves no temp file") {
    testsupport::TempDir dir("io");
    jsonio::write_file_atomic(dir / "f.txt", "hello");
    CHECK(jsonio::read_file(dir / "f.txt") == "hello");
    size_t files = 0;
    for ([[maybe_unused]] auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
    CHECK(files == 1);
    CHECK_THROWS_AS(jsonio::read_file(dir / "missing"), IoError);
}
