#include <catch2/catch.hpp>

#include <cmath>
#include <map>

#include "hateharness/finetune.hpp"
#include "hateharness/fixtures.hpp"
#include "test_support.hpp"

using namespace hateharness;
using corpus::Label;
using encoder::Group;
using encoder::MockEncoder;
using finetune::TrainConfig;

namespace {

MockEncoder desk_encoder(int layers = 2, std::uint64_t seed = 7, int hidden = 16) {
  MockEncoder::Config cfg;
  cfg.n_layers = layers;
  cfg.hidden_dim = hidden;
  cfg.vocab_size = 4096;
  cfg.seed = seed;
  return MockEncoder(cfg);
}

TrainConfig desk_config() {
  TrainConfig cfg;
  cfg.base_lr = 0.02;  // the mock needs a desk-scale rate, not the BERT one
  cfg.seed = 7;
  return cfg;
}

struct DeskData {
  corpus::DatasetBundle train, validate, test;
};

DeskData desk_data(std::size_t n = 500, std::uint64_t seed = 42) {
  const auto bundle = fixtures::synthetic_separable(n, seed);
  preprocess::SplitConfig sc;
  sc.seed = 7;
  auto split = preprocess::split_dataset(bundle, sc);
  return {std::move(split.train), std::move(split.validate), std::move(split.test)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Discriminative learning rates
// ---------------------------------------------------------------------------

TEST_CASE("discriminative rates decay downward from the top layer") {
  encoder::EncoderSpec spec{12};
  const auto rates = finetune::discriminative_lrs(spec);

  CHECK(rates[spec.group_index(Group::head())] == 2e-5);
  CHECK(rates[spec.group_index(Group::encoder_layer(12))] == Approx(1.9e-5).margin(1e-18));
  CHECK(rates[spec.group_index(Group::encoder_layer(11))] == Approx(1.71e-5).margin(1e-15));
  CHECK(rates[spec.group_index(Group::embeddings())] ==
        Approx(1.9e-5 * std::pow(0.9, 12)).margin(1e-15));

  // closed form for each layer
  for (int j = 1; j <= 12; ++j)
    CHECK(rates[spec.group_index(Group::encoder_layer(j))] ==
          Approx(1.9e-5 * std::pow(0.9, 12 - j)).margin(1e-15));
}

TEST_CASE("discriminative rates validate their parameters") {
  encoder::EncoderSpec spec{12};
  CHECK_THROWS(finetune::discriminative_lrs(spec, 0.0));
  CHECK_THROWS(finetune::discriminative_lrs(spec, 1.9e-5, 0.0));
  CHECK_THROWS(finetune::discriminative_lrs(spec, 1.9e-5, 1.5));
  CHECK_THROWS(finetune::discriminative_lrs(spec, 1.9e-5, 0.9, -1.0));
}

TEST_CASE("the bottom anchor flips the geometric ladder") {
  encoder::EncoderSpec spec{4};
  const auto rates = finetune::discriminative_lrs(spec, 1e-4, 0.5, 2e-4, false);
  CHECK(rates[spec.group_index(Group::encoder_layer(1))] == Approx(1e-4));
  CHECK(rates[spec.group_index(Group::encoder_layer(2))] == Approx(2e-4));
  CHECK(rates[spec.group_index(Group::encoder_layer(4))] == Approx(8e-4));
  CHECK(rates[spec.group_index(Group::embeddings())] == Approx(0.5e-4));
  CHECK(rates[spec.group_index(Group::head())] == Approx(2e-4));
}

// ---------------------------------------------------------------------------
// Freeze plans
// ---------------------------------------------------------------------------

TEST_CASE("freeze plans open one layer per epoch from the top") {
  encoder::EncoderSpec spec{12};
  const auto plan = finetune::freeze_plan(spec, 4);
  REQUIRE(plan.epochs == 4);
  REQUIRE(plan.trainable.size() == 4);

  CHECK(plan.trainable[0] == std::vector<Group>{Group::head(), Group::encoder_layer(12)});
  CHECK(plan.trainable[3] ==
        std::vector<Group>{Group::head(), Group::encoder_layer(9), Group::encoder_layer(10),
                           Group::encoder_layer(11), Group::encoder_layer(12)});

  const auto full = finetune::freeze_plan(spec, 12);
  CHECK(full.trainable.back().size() == 13);  // head + all 12 layers

  const auto single = finetune::freeze_plan(spec, 1);
  REQUIRE(single.epochs == 1);
  CHECK(single.trainable[0] == std::vector<Group>{Group::head(), Group::encoder_layer(12)});
}

TEST_CASE("freeze plans grow monotonically and never touch the embeddings") {
  encoder::EncoderSpec spec{12};
  for (int k : {1, 2, 4, 8, 12}) {
    const auto plan = finetune::freeze_plan(spec, k);
    std::size_t previous = 0;
    for (const auto& set : plan.trainable) {
      REQUIRE(set.size() >= previous);
      previous = set.size();
      bool has_head = false;
      for (const auto& g : set) {
        REQUIRE(g.kind != encoder::GroupKind::Embeddings);
        has_head = has_head || g == Group::head();
      }
      REQUIRE(has_head);
    }
  }
  CHECK_THROWS_WITH(finetune::freeze_plan(spec, 0), Catch::Contains("[1, 12]"));
  CHECK_THROWS_WITH(finetune::freeze_plan(spec, 13), Catch::Contains("[1, 12]"));
}

// ---------------------------------------------------------------------------
// Warmup
// ---------------------------------------------------------------------------

TEST_CASE("warmup multiplier ramps then decays") {
  CHECK(finetune::warmup_multiplier(49, 100, 400) == Approx(0.5));
  CHECK(finetune::warmup_multiplier(99, 100, 400) == Approx(1.0));
  CHECK(finetune::warmup_multiplier(250, 100, 400) == Approx(0.5));
  for (long step = 0; step < 400; ++step)
    CHECK(finetune::warmup_multiplier(step, 0, 400) == 1.0);
}

TEST_CASE("warmup multiplier is monotone on both sides of the peak") {
  const long warmup = 37, total = 211;
  double prev = 0.0;
  for (long step = 0; step < warmup; ++step) {
    const double m = finetune::warmup_multiplier(step, warmup, total);
    REQUIRE(m >= prev);
    REQUIRE(m <= 1.0);
    prev = m;
  }
  prev = 2.0;
  for (long step = warmup; step < total; ++step) {
    const double m = finetune::warmup_multiplier(step, warmup, total);
    REQUIRE(m <= prev);
    REQUIRE(m > 0.0);
    prev = m;
  }
}

TEST_CASE("warmup multiplier can hold constant after the ramp") {
  CHECK(finetune::warmup_multiplier(250, 100, 400, false) == 1.0);
  CHECK(finetune::warmup_multiplier(50, 100, 400, false) == Approx(0.51));
}

TEST_CASE("warmup multiplier rejects out-of-range steps") {
  CHECK_THROWS(finetune::warmup_multiplier(-1, 10, 100));
  CHECK_THROWS(finetune::warmup_multiplier(100, 10, 100));
  CHECK_THROWS(finetune::warmup_multiplier(0, 100, 100));
}

TEST_CASE("unfreeze strategies force their epoch count") {
  TrainConfig cfg;
  cfg.strategy = finetune::StrategyUnfreeze{8};
  CHECK(finetune::effective_epochs(cfg) == 8);
  cfg.epochs = 8;
  CHECK(finetune::effective_epochs(cfg) == 8);
  cfg.epochs = 4;
  CHECK_THROWS_WITH(finetune::effective_epochs(cfg), Catch::Contains("forces"));

  TrainConfig plain;
  CHECK(finetune::effective_epochs(plain) == 4);
  plain.epochs = 5;
  CHECK(finetune::effective_epochs(plain) == 5);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TEST_CASE("the mock learns the separable dataset") {
  auto data = desk_data();
  auto model = desk_encoder();
  preprocess::HashTokenizer tok(model.config().vocab_size);

  const auto history = finetune::train(model, data.train, data.validate, tok, desk_config());
  REQUIRE(history.epochs.size() == 4);
  CHECK(history.epochs.back().val_mcc >= 0.9);
  // §-style anchor: the loss falls over the first two epochs
  CHECK(history.epochs[1].train_loss < history.epochs[0].train_loss);
}

TEST_CASE("training histories are bit-reproducible") {
  auto data = desk_data(200, 6);
  preprocess::HashTokenizer tok(4096);

  auto one = desk_encoder(2, 3);
  const auto first = finetune::train(one, data.train, data.validate, tok, desk_config());
  auto two = desk_encoder(2, 3);
  const auto second = finetune::train(two, data.train, data.validate, tok, desk_config());
  REQUIRE(first == second);
}

TEST_CASE("unfreeze(8) trains for exactly eight epochs") {
  auto data = desk_data(150, 4);
  auto model = desk_encoder(12, 2, 8);
  preprocess::HashTokenizer tok(model.config().vocab_size);

  auto cfg = desk_config();
  cfg.strategy = finetune::StrategyUnfreeze{8};
  const auto history = finetune::train(model, data.train, data.validate, tok, cfg);
  CHECK(history.epochs.size() == 8);
}

TEST_CASE("frozen groups stay bit-identical through their frozen epochs") {
  auto data = desk_data(120, 14);
  auto model = desk_encoder(3, 21, 8);
  preprocess::HashTokenizer tok(model.config().vocab_size);

  auto cfg = desk_config();
  cfg.strategy = finetune::StrategyUnfreeze{3};

  const auto plan = finetune::freeze_plan(model.spec(), 3);
  auto snapshot = [&model] {
    std::map<std::string, std::vector<double>> values;
    for (const auto& g : model.parameter_groups())
      for (std::size_t ti = 0; ti < model.group_tensors(g).size(); ++ti)
        values[encoder::group_name(g) + "/" + std::to_string(ti)] =
            model.group_tensors(g)[ti]->value;
    return values;
  };

  auto before = snapshot();
  finetune::train(model, data.train, data.validate, tok, cfg,
                  [&](int epoch, const encoder::Encoder&) {
                    const auto after = snapshot();
                    const auto& trainable = plan.trainable[static_cast<std::size_t>(epoch)];
                    for (const auto& g : model.parameter_groups()) {
                      const bool was_trainable =
                          std::find(trainable.begin(), trainable.end(), g) != trainable.end();
                      for (std::size_t ti = 0; ti < model.group_tensors(g).size(); ++ti) {
                        const auto key = encoder::group_name(g) + "/" + std::to_string(ti);
                        if (!was_trainable) REQUIRE(after.at(key) == before.at(key));
                      }
                    }
                    before = after;
                  });
  // the embeddings were frozen throughout
  CHECK(model.is_trainable(Group::embeddings()) == false);
}

TEST_CASE("discriminative step sizes stay ordered top to bottom") {
  encoder::EncoderSpec spec{6};
  TrainConfig cfg;
  cfg.strategy = finetune::StrategyDiscriminative{};
  const auto sched = finetune::make_schedule(spec, cfg, 50);
  for (long step = 0; step < 50; ++step) {
    double above = sched.rate(spec.group_index(Group::head()), step);
    for (int j = spec.n_encoder_layers; j >= 1; --j) {
      const double here = sched.rate(spec.group_index(Group::encoder_layer(j)), step);
      REQUIRE(above >= here);
      above = here;
    }
    REQUIRE(above >= sched.rate(spec.group_index(Group::embeddings()), step));
  }
}

TEST_CASE("warmup training applies the multiplier schedule") {
  auto data = desk_data(200, 8);
  auto model = desk_encoder();
  preprocess::HashTokenizer tok(model.config().vocab_size);

  auto cfg = desk_config();
  cfg.strategy = finetune::StrategyWarmup{25};
  const auto history = finetune::train(model, data.train, data.validate, tok, cfg);
  CHECK(history.epochs.size() == 4);

  // 7 batches per epoch over 4 epochs cannot host 100 warmup steps
  cfg.strategy = finetune::StrategyWarmup{100};
  auto model2 = desk_encoder();
  auto small = desk_data(200, 8);
  CHECK_THROWS_WITH(finetune::train(model2, small.train, small.validate, tok, cfg),
                    Catch::Contains("warmup"));
}

TEST_CASE("train rejects empty splits and oversized unfreeze depths") {
  auto data = desk_data(120, 3);
  auto model = desk_encoder();
  preprocess::HashTokenizer tok(model.config().vocab_size);

  corpus::DatasetBundle empty;
  empty.name = "empty";
  CHECK_THROWS_WITH(finetune::train(model, empty, data.validate, tok, desk_config()),
                    Catch::Contains("empty training split"));
  CHECK_THROWS_WITH(finetune::train(model, data.train, empty, tok, desk_config()),
                    Catch::Contains("empty validation split"));

  auto cfg = desk_config();
  cfg.strategy = finetune::StrategyUnfreeze{8};  // encoder only has 2 layers
  CHECK_THROWS_WITH(finetune::train(model, data.train, data.validate, tok, cfg),
                    Catch::Contains("exceeds"));
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

TEST_CASE("argmax prediction follows the index convention") {
  CHECK(finetune::label_from_logits({0.9, 0.1}) == Label::NonHate);
  CHECK(finetune::label_from_logits({0.1, 0.9}) == Label::Hate);
  CHECK(finetune::label_from_logits({0.4, 0.4}) == Label::NonHate);  // tie: lower index
}

TEST_CASE("permuting a bundle permutes the predictions") {
  auto data = desk_data(80, 12);
  auto model = desk_encoder();
  preprocess::HashTokenizer tok(model.config().vocab_size);
  finetune::train(model, data.train, data.validate, tok, desk_config());

  const auto preds = finetune::predict(model, data.test, tok);
  REQUIRE(preds.size() == data.test.records.size());

  corpus::DatasetBundle reversed = data.test;
  std::reverse(reversed.records.begin(), reversed.records.end());
  const auto reversed_preds = finetune::predict(model, reversed, tok);
  for (std::size_t i = 0; i < preds.size(); ++i)
    REQUIRE(reversed_preds[preds.size() - 1 - i] == preds[i]);
}
