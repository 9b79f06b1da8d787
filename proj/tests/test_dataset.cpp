#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "kcdiff/dataset.hpp"
#include "test_support.hpp"

using namespace kcdiff;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("kcdiff_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool box_inside(const Box& inner, const Box& outer) {
  return (inner.min.array() >= outer.min.array() - 1e-12).all() &&
         (inner.max.array() <= outer.max.array() + 1e-12).all();
}

bool circle_inside(const Circle& c, const Box& outer) {
  return (c.center.array() - c.radius >= outer.min.array() - 1e-12).all() &&
         (c.center.array() + c.radius <= outer.max.array() + 1e-12).all();
}

}  // namespace

TEST(Levels, Specs) {
  EXPECT_EQ(level_spec(1).max_objects, 0);
  EXPECT_EQ(level_spec(2).min_objects, 1);
  EXPECT_EQ(level_spec(2).max_objects, 1);
  EXPECT_EQ(level_spec(3).max_objects, 2);
  EXPECT_EQ(level_spec(4).min_objects, 3);
  EXPECT_EQ(level_spec(4).max_objects, 4);
  EXPECT_THROW(level_spec(0), std::invalid_argument);
  EXPECT_THROW(level_spec(5), std::invalid_argument);
}

TEST(Shelf, FixturesAndSlots) {
  const ShelfLayout shelf;
  EXPECT_EQ(shelf.fixtures().size(), 5u);
  const std::vector<Box> slots = shelf.slots();
  ASSERT_EQ(slots.size(), 3u);
  for (const Box& s : slots) {
    EXPECT_LT(s.min.x(), s.max.x());
    EXPECT_LT(s.min.y(), s.max.y());
    // No slot overlaps a board.
    for (const Obstacle& f : shelf.fixtures()) {
      const Vec2 mid = 0.5 * (s.min + s.max);
      EXPECT_GT(signed_distance(Capsule{mid, mid, 0.0}, f), 0.0);
    }
  }
}

TEST(Environment, ObjectCountsAndPlacementPerLevel) {
  const ShelfLayout shelf;
  const std::vector<Box> slots = shelf.slots();
  for (int level = 1; level <= 4; ++level) {
    const LevelSpec spec = level_spec(level);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      const Environment env = generate_environment(spec, shelf, rng);
      EXPECT_EQ(env.fixtures.size(), shelf.fixtures().size());
      const std::size_t extra = env.objects.size();
      EXPECT_GE(extra, static_cast<std::size_t>(spec.min_objects * 3));
      EXPECT_LE(extra, static_cast<std::size_t>(spec.max_objects * 3));
      for (std::size_t i = 0; i < env.objects.size(); ++i) {
        bool placed = false;
        for (const Box& s : slots) {
          if (const auto* c = std::get_if<Circle>(&env.objects[i])) {
            placed |= circle_inside(*c, s);
            EXPECT_GE(c->radius, spec.min_size);
            EXPECT_LE(c->radius, spec.max_size);
          } else {
            placed |= box_inside(std::get<Box>(env.objects[i]), s);
          }
        }
        EXPECT_TRUE(placed) << "level " << level << " seed " << seed << " object " << i;
      }
      Rng again(seed);
      EXPECT_EQ(to_json(generate_environment(spec, shelf, again)), to_json(env));
    }
  }
}

TEST(SampleProblem, RespectsSeparationAndFreedom) {
  const ArmModel arm = ArmModel::planar_default();
  DomainConfig domain;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto prob = draw_problem(domain, 3, i);
    ASSERT_TRUE(prob.has_value());
    EXPECT_FALSE(in_collision(arm, prob->env, prob->q_s));
    EXPECT_FALSE(in_collision(arm, prob->env, prob->q_g));
    EXPECT_GE((prob->q_s - prob->q_g).norm(), domain.sampling.min_separation);
  }
}

TEST(SampleProblem, FailsWhenEverythingCollides) {
  const ArmModel arm = ArmModel::planar_default();
  Environment env;
  env.objects.push_back(Box{Vec2(-2, -2), Vec2(2, 2)});
  ProblemSampling s;
  s.max_tries = 50;
  Rng rng(1);
  EXPECT_FALSE(sample_problem(env, arm, s, rng).has_value());
}

TEST(Record, GeneratedRecordsAreValid) {
  const ArmModel arm = ArmModel::planar_default();
  DomainConfig domain;
  int ok = 0;
  for (std::uint64_t i = 0; i < 8; ++i) {
    const auto prob = draw_problem(domain, 11, i);
    ASSERT_TRUE(prob);
    Rng rng(i);
    const auto rec = generate_record(*prob, arm, domain.build, rng);
    if (!rec) continue;
    ++ok;
    EXPECT_EQ(rec->tau.rows(), domain.build.horizon);
    EXPECT_TRUE((rec->tau.row(0).transpose().array() == prob->q_s.array()).all());
    EXPECT_TRUE((rec->tau.row(rec->tau.rows() - 1).transpose().array() == prob->q_g.array()).all());
    EXPECT_TRUE(trajectory_free(arm, prob->env, rec->tau, domain.build.check_resolution / 2));
    EXPECT_TRUE(validate_record(*rec, arm, domain.build.horizon, domain.build.check_resolution));
  }
  EXPECT_GE(ok, 6);
}

TEST(Record, ValidationRejectsBrokenRecords) {
  const ArmModel arm = ArmModel::planar_default();
  DomainConfig domain;
  const auto prob = draw_problem(domain, 11, 0);
  Rng rng(0);
  auto rec = generate_record(*prob, arm, domain.build, rng);
  ASSERT_TRUE(rec);
  DatasetRecord moved = *rec;
  moved.tau(0, 0) += 1e-9;
  EXPECT_FALSE(validate_record(moved, arm, domain.build.horizon, domain.build.check_resolution));
  EXPECT_FALSE(validate_record(*rec, arm, domain.build.horizon + 1, domain.build.check_resolution));
  DatasetRecord blocked = *rec;
  blocked.problem.env.objects.push_back(Box{Vec2(-2, -2), Vec2(2, 2)});
  EXPECT_FALSE(validate_record(blocked, arm, domain.build.horizon, domain.build.check_resolution));
}

TEST(DomainConfig, JsonRoundTrip) {
  DomainConfig d;
  d.level = 3;
  d.build.horizon = 32;
  d.build.trajopt.iterations = 17;
  d.sampling.min_separation = 0.7;
  const DomainConfig back = domain_from_json(Json::parse(to_json(d).dump()));
  EXPECT_EQ(to_json(back), to_json(d));
  EXPECT_EQ(back.level, 3);
  EXPECT_EQ(back.build.horizon, 32);
}

TEST(Dataset, BuildIsDeterministicAndRoundTrips) {
  DomainConfig domain;
  domain.build.horizon = 16;
  const auto a = temp_file("ds_a.jsonl");
  const auto b = temp_file("ds_b.jsonl");
  const BuildSummary sa = build_dataset(domain, 6, a, 42, 1);
  const BuildSummary sb = build_dataset(domain, 6, b, 42, 1);
  EXPECT_EQ(sa.requested, 6);
  EXPECT_EQ(sa.successes + sa.failures, 6);
  EXPECT_EQ(to_json(sa), to_json(sb));
  EXPECT_EQ(slurp(a), slurp(b));
  const DatasetFile f = load_dataset(a);
  EXPECT_EQ(static_cast<int>(f.records.size()), sa.successes);
  EXPECT_EQ(f.header.at("kind"), "kcdiff-dataset");
  const ArmModel arm = ArmModel::planar_default();
  for (const DatasetRecord& r : f.records) EXPECT_TRUE(validate_record(r, arm, 16, domain.build.check_resolution));
  save_dataset(f, b);
  EXPECT_EQ(slurp(a), slurp(b));
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST(Dataset, AnnotatePhiMatchesRepresentation) {
  DomainConfig domain;
  domain.build.horizon = 16;
  const auto path = temp_file("ds_phi.jsonl");
  build_dataset(domain, 8, path, 5, 1);
  const ArmModel arm = ArmModel::planar_default();
  const DatasetFile f = load_dataset(path);
  KeyConfigParams p;
  p.K = 4;
  p.c = 0.01;
  Rng rng(1);
  const KeyConfigSet keys = select_key_configurations(f.records, arm, p, rng);
  annotate_phi(path, keys, arm, path);
  const DatasetFile g = load_dataset(path);
  ASSERT_EQ(g.records.size(), f.records.size());
  EXPECT_EQ(g.header.at("n_keys"), 4);
  for (const DatasetRecord& r : g.records) {
    ASSERT_TRUE(r.phi);
    EXPECT_EQ(*r.phi, env_representation(keys, arm, r.problem.env));
  }
  std::filesystem::remove(path);
}

TEST(Dataset, LoadErrorsNameTheLine) {
  const auto path = temp_file("ds_bad.jsonl");
  write_text_file(path, "{\"kind\":\"kcdiff-dataset\",\"version\":1}\n{broken\n");
  try {
    load_dataset(path);
    FAIL() << "expected a parse error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
  EXPECT_ANY_THROW(load_dataset(path));
}
