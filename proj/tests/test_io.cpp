#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>

#include "objnav/config.hpp"
#include "objnav/container.hpp"
#include "objnav/rng.hpp"

using namespace objnav;

TEST_CASE("container round-trips tensors at float precision", "[io]") {
  Rng rng(1);
  std::vector<std::pair<std::string, Tensor>> tensors;
  tensors.emplace_back("a", Tensor::gaussian({3, 4}, rng));
  tensors.emplace_back("b.weight", Tensor::gaussian({2, 2, 3, 3}, rng));
  tensors.emplace_back("scalar", Tensor::scalar(-0.75));
  std::vector<std::pair<std::string, const Tensor*>> refs;
  for (auto& [n, t] : tensors) refs.emplace_back(n, &t);
  const std::string path = "test_container.odrq";
  save_tensors(path, refs);

  auto loaded = load_tensors(path);
  REQUIRE(loaded.size() == tensors.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    REQUIRE(loaded[i].first == tensors[i].first);
    REQUIRE(loaded[i].second.shape() == tensors[i].second.shape());
    for (std::size_t j = 0; j < loaded[i].second.size(); ++j) {
      const double orig = tensors[i].second[j];
      REQUIRE(loaded[i].second[j] == double(float(orig)));  // exactly the f32 value
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("container magic and version layout is stable", "[io]") {
  Tensor t = Tensor::scalar(1.0);
  const std::string path = "test_container_magic.odrq";
  save_tensors(path, {{"x", &t}});
  std::ifstream is(path, std::ios::binary);
  char head[6];
  REQUIRE(is.read(head, 6).good());
  REQUIRE(head[0] == 'O');
  REQUIRE(head[1] == 'D');
  REQUIRE(head[2] == 'R');
  REQUIRE(head[3] == 'Q');
  REQUIRE(std::uint8_t(head[4]) == 1);  // version u16 little-endian
  REQUIRE(std::uint8_t(head[5]) == 0);
  is.close();
  std::remove(path.c_str());
}

TEST_CASE("bad magic and truncated containers are rejected", "[io]") {
  const std::string path = "test_container_bad.odrq";
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE";
  }
  REQUIRE_THROWS_WITH(load_tensors(path), Catch::Matchers::ContainsSubstring("magic"));
  {
    Tensor t = Tensor::gaussian({4, 4}, *std::make_unique<Rng>(2));
    save_tensors(path, {{"x", &t}});
  }
  // Truncate mid-record.
  std::ifstream is(path, std::ios::binary);
  std::string all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  is.close();
  {
    std::ofstream os(path, std::ios::binary);
    os.write(all.data(), std::streamsize(all.size() / 2));
  }
  REQUIRE_THROWS_WITH(load_tensors(path), Catch::Matchers::ContainsSubstring("truncated"));
  std::remove(path.c_str());
}

TEST_CASE("missing files fail loudly", "[io]") {
  REQUIRE_THROWS_AS(load_tensors("does_not_exist.odrq"), std::runtime_error);
}

TEST_CASE("config parses key=value lines with comments", "[io]") {
  Config c = Config::from_string(
      "  alpha = 0.5 \n"
      "\n"
      "# full comment\n"
      "name=shift\n"
      "count = 12\n"
      "flag=true\n");
  REQUIRE(c.get_double("alpha", 0.0) == 0.5);
  REQUIRE(c.get_string("name", "") == "shift");
  REQUIRE(c.get_int("count", 0) == 12);
  REQUIRE(c.get_bool("flag", false));
  REQUIRE(c.get_int("absent", 42) == 42);
}

TEST_CASE("config rejects malformed input", "[io]") {
  REQUIRE_THROWS_WITH(Config::from_string("no equals sign\n"),
                      Catch::Matchers::ContainsSubstring("key=value"));
  Config c = Config::from_string("x=notanumber\n");
  REQUIRE_THROWS_AS(c.get_double("x", 0.0), std::runtime_error);
  REQUIRE_THROWS_AS(c.get_bool("x", false), std::runtime_error);
  Config dup = Config::from_string("k=1\nk=2\n");
  REQUIRE(dup.get_int("k", 0) == 2);  // last one wins
}

TEST_CASE("unknown keys are caught against a registry", "[io]") {
  Config c = Config::from_string("known=1\nmystery=2\n");
  REQUIRE_THROWS_WITH(c.check_known_keys({"known"}),
                      Catch::Matchers::ContainsSubstring("mystery"));
  REQUIRE_NOTHROW(c.check_known_keys({"known", "mystery"}));
}

TEST_CASE("environment seed override wins over config", "[io]") {
  Config c = Config::from_string("seed=5\n");
  REQUIRE(resolve_seed(c, 1) == 5);
  setenv("OBJNAV_SEED", "99", 1);
  REQUIRE(resolve_seed(c, 1) == 99);
  unsetenv("OBJNAV_SEED");
  REQUIRE(resolve_seed(c, 1) == 5);
  REQUIRE(resolve_seed(Config::from_string(""), 7) == 7);
}

TEST_CASE("rng streams split independently of draw position", "[io]") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 10; ++i) a.uniform();  // advance a
  // Splits depend on the construction seed, not the stream position.
  REQUIRE(a.split(3).next_u64() == b.split(3).next_u64());
  REQUIRE(a.split(3).next_u64() != a.split(4).next_u64());
}

TEST_CASE("normal draws consume a fixed number of raw draws", "[io]") {
  Rng a(7), b(7);
  a.normal();
  b.next_u64();
  b.next_u64();
  REQUIRE(a.next_u64() == b.next_u64());
}
