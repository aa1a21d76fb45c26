#include "sartrack/identity.hpp"
#include "sartrack/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace sartrack;
using namespace sartrack::identity;

namespace {

Embedding random_unit(std::uint64_t seed)
{
    Rng rng(seed);
    EmbeddingValues v{};
    double n = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        n += x * x;
    }
    for (auto& x : v) {
        x /= std::sqrt(n);
    }
    return Embedding(v);
}

// Query at an exact Euclidean distance from `base` along one axis.
Embedding offset(const Embedding& base, double distance)
{
    auto v = base.values();
    v[0] += distance;
    return Embedding(v);
}

} // namespace

TEST(Threshold, StrictlyBelowPointSix)
{
    const Embedding zero;
    const std::vector<Template> t{{"a", zero, 0.0}};
    const auto below = match(offset(zero, 0.6 - 1e-9), t);
    ASSERT_TRUE(below.has_value());
    EXPECT_TRUE(below->matched);
    const auto at = match(offset(zero, 0.6), t);
    ASSERT_TRUE(at.has_value());
    EXPECT_EQ(at->distance, 0.6);
    EXPECT_FALSE(at->matched);
}

TEST(Match, EmptyRegistry)
{
    EXPECT_FALSE(match(random_unit(1), {}).has_value());
    EXPECT_FALSE(Registry{}.match(random_unit(1)).has_value());
}

TEST(Match, NearestTemplateWins)
{
    const auto a = random_unit(1);
    const auto b = random_unit(2);
    Registry r;
    r.capture("alice", a, 1.0);
    r.capture("bob", b, 2.0);
    const auto m = r.match(offset(b, 0.1));
    ASSERT_TRUE(m.has_value());
    EXPECT_EQ(m->label, "bob");
    EXPECT_NEAR(m->distance, 0.1, 1e-12);
    EXPECT_TRUE(m->matched);
}

TEST(Match, TiesGoToEarliestCapture)
{
    const Embedding zero;
    const std::vector<Template> t{{"late", zero, 5.0}, {"early", zero, 1.0}};
    EXPECT_EQ(match(zero, t)->label, "early");
}

TEST(Match, DistinctIdentitiesDoNotMatch)
{
    // Random unit vectors in 128-d sit about sqrt(2) apart.
    for (std::uint64_t s = 1; s < 50; ++s) {
        EXPECT_GT(euclidean_distance(random_unit(s), random_unit(s + 1000)), 0.6);
    }
}

TEST(Registry, CaptureReplacesSameLabel)
{
    Registry r;
    r.capture("alice", random_unit(1), 1.0);
    r.capture("alice", random_unit(2), 3.0);
    EXPECT_EQ(r.size(), 1u);
    EXPECT_EQ(r.find("alice")->embedding, random_unit(2));
    EXPECT_EQ(r.find("alice")->captured_at, 3.0);
    EXPECT_THROW(r.capture("", random_unit(3), 0.0), Error);
    EXPECT_THROW(r.capture("a,b", random_unit(3), 0.0), Error);
}

TEST(Embedding, RejectsWrongSizeAndNonFinite)
{
    EXPECT_THROW(Embedding::from(std::vector<double>(127, 0.0)), Error);
    EmbeddingValues v{};
    v[3] = NAN;
    EXPECT_THROW(Embedding{v}, Error);
}

TEST(RegistryFile, RoundTripIsExact)
{
    Registry r;
    r.capture("alice", random_unit(1), 0.1);
    r.capture("bob", random_unit(2), 12.345678901234567);
    const auto back = parse_registry(format_registry(r));
    ASSERT_EQ(back.size(), 2u);
    for (const auto& t : r.templates()) {
        const auto* u = back.find(t.label);
        ASSERT_NE(u, nullptr);
        EXPECT_EQ(u->embedding, t.embedding);
        EXPECT_EQ(u->captured_at, t.captured_at);
    }
}

TEST(RegistryFile, SaveLoadAtomic)
{
    const auto dir = std::filesystem::temp_directory_path() / "sartrack_identity_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "registry.txt";
    Registry r;
    r.capture("carol", random_unit(7), 2.0);
    save_registry(path, r);
    EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
    EXPECT_EQ(load_registry(path).find("carol")->embedding, random_unit(7));
    std::filesystem::remove_all(dir);
}

TEST(RegistryFile, ParseErrorsCarryLineNumbers)
{
    EXPECT_THROW(parse_registry("nonsense\n"), ParseError);
    std::string text(registry_header);
    text += "\nalice,1,2,3\n";
    try {
        parse_registry(text);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    Registry r;
    r.capture("alice", random_unit(1), 0.0);
    auto dup = format_registry(r);
    dup += dup.substr(dup.find('\n') + 1);
    try {
        parse_registry(dup);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}
