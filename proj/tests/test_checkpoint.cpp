#include <gtest/gtest.h>

#include <filesystem>

#include "sgap/checkpoint.hpp"

namespace sgap {
namespace {

Model trained_looking_model(std::uint64_t seed) {
  auto model = build_residual_mlp({6, 8, 2, 3});
  Rng rng(seed);
  init_he_uniform(model, rng);
  for (auto& p : model.parameters()) {
    if (!p.prunable) {
      for (float& b : p.value->data()) b = rng.uniform(-0.1f, 0.1f);
    }
  }
  return model;
}

CheckpointMeta sample_meta() {
  CheckpointMeta meta;
  meta.model_spec = ModelSpec{6, 8, 2, 3};
  meta.optimizer = "stochgradadam";
  meta.hyper.delta = 0.99;
  meta.step = 1234;
  meta.rng_state = Rng(7).state();
  meta.dataset = "spirals(k=3,n=10,d=6,seed=1)";
  meta.extra = {{"note", "unit"}};
  return meta;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto model = trained_looking_model(1);
  const auto bytes = serialize_checkpoint(model, sample_meta());
  ASSERT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SGAP");
  const auto loaded = deserialize_checkpoint(bytes);
  const auto a = model.parameters();
  const auto b = loaded.model.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].name, b[k].name);
    EXPECT_EQ(*a[k].value, *b[k].value);
    EXPECT_EQ(a[k].prunable, b[k].prunable);
  }
  EXPECT_EQ(loaded.meta.optimizer, "stochgradadam");
  EXPECT_EQ(loaded.meta.hyper, sample_meta().hyper);
  EXPECT_EQ(loaded.meta.step, 1234u);
  EXPECT_EQ(loaded.meta.model_spec, sample_meta().model_spec);
  EXPECT_EQ(loaded.meta.extra["note"], "unit");
  Rng restored;
  restored.set_state(loaded.meta.rng_state);
  EXPECT_EQ(restored, Rng(7));
  // save -> load -> save is byte-identical
  EXPECT_EQ(serialize_checkpoint(loaded.model, loaded.meta), bytes);
}

TEST(Checkpoint, PayloadIsLittleEndianFloat32InRegistryOrder) {
  Dense d(1, 1, false);
  d.weight[0] = 1.0f;  // 0x3f800000
  Model model({d, SoftmaxCrossEntropy{1}});
  const auto bytes = serialize_checkpoint(model, CheckpointMeta{});
  const std::vector<std::uint8_t> tail(bytes.end() - 12, bytes.end());
  EXPECT_EQ(tail, (std::vector<std::uint8_t>{4, 0, 0, 0, 0, 0, 0, 0, 0x00, 0x00,
                                             0x80, 0x3f}));
}

TEST(Checkpoint, CorruptContainersAreRejected) {
  const auto good = serialize_checkpoint(trained_looking_model(2), sample_meta());

  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad_magic), FormatError);

  auto bad_version = good;
  bad_version[4] = 9;
  EXPECT_THROW(deserialize_checkpoint(bad_version), FormatError);

  auto truncated = good;
  truncated.pop_back();
  EXPECT_THROW(deserialize_checkpoint(truncated), FormatError);

  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(deserialize_checkpoint(trailing), FormatError);

  auto bad_json = good;
  bad_json[16] = '#';
  EXPECT_THROW(deserialize_checkpoint(bad_json), FormatError);

  EXPECT_THROW(deserialize_checkpoint(std::vector<std::uint8_t>{'S', 'G'}),
               FormatError);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path =
      std::filesystem::temp_directory_path() / "sgap_ckpt_test" / "model.sgap";
  const auto model = trained_looking_model(3);
  save_checkpoint(path, model, sample_meta());
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(serialize_checkpoint(loaded.model, loaded.meta),
            read_bytes(path));
  std::filesystem::remove_all(path.parent_path());
  EXPECT_THROW(load_checkpoint(path), DataError);
}

}  // namespace
}  // namespace sgap
