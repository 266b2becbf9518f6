#include <doctest.h>

#include <cmath>

#include "ntmlab/ntm.hpp"
#include "ntmlab/tasks.hpp"
#include "support/gradcheck.hpp"

using namespace ntmlab;
using ntmlab::testing::model_gradcheck;
using ntmlab::testing::random_tensor;

namespace {

NtmConfig small_config() {
  NtmConfig cfg;
  cfg.memory_rows = 4;
  cfg.memory_width = 4;
  cfg.shift_range = 3;
  return cfg;
}

Tensor simplex_from(Tape& tape, Rng& rng, std::size_t n) {
  Tensor logits = random_tensor({n}, rng, -2.0, 2.0);
  return tape.value(tape.softmax(tape.constant(logits), 0));
}

void check_simplex(const Tensor& w, double tol = 1e-6) {
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(w[i] >= 0.0);
    sum += w[i];
  }
  CHECK(std::fabs(sum - 1.0) < tol);
}

}  // namespace

TEST_SUITE_BEGIN("ntm_core");

TEST_CASE("config invariants are enforced") {
  NtmConfig cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.memory_rows = 1;
  CHECK_THROWS(cfg.validate());
  cfg = small_config();
  cfg.shift_range = 4;  // even
  CHECK_THROWS(cfg.validate());
  cfg = small_config();
  cfg.shift_range = 5;
  cfg.memory_rows = 4;  // kernel larger than memory
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("decode_head_params on an all-zero raw vector") {
  NtmConfig cfg = small_config();
  const double ln2 = std::log(2.0);

  SUBCASE("read head") {
    Tape tape;
    Var raw = tape.constant(Tensor({cfg.read_raw_size()}));
    HeadVars head = decode_head_params(tape, raw, false, cfg);
    for (std::size_t i = 0; i < 4; ++i) CHECK(tape.value(head.key)[i] == 0.0);
    CHECK(tape.value(head.beta)[0] == doctest::Approx(ln2).epsilon(1e-12));
    CHECK(tape.value(head.gate)[0] == doctest::Approx(0.5).epsilon(1e-12));
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(tape.value(head.shift_dist)[i] ==
            doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    CHECK(tape.value(head.gamma)[0] == doctest::Approx(1.0 + ln2).epsilon(1e-12));
    CHECK_FALSE(head.erase.valid());
    CHECK_FALSE(head.add.valid());
  }

  SUBCASE("write head additionally yields e=0.5, a=0") {
    Tape tape;
    Var raw = tape.constant(Tensor({cfg.write_raw_size()}));
    HeadVars head = decode_head_params(tape, raw, true, cfg);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(tape.value(head.erase)[i] == doctest::Approx(0.5).epsilon(1e-12));
      CHECK(tape.value(head.add)[i] == 0.0);
    }
  }
}

TEST_CASE("decode clips raw values to the clip bound first") {
  NtmConfig cfg = small_config();
  Tape tape;
  Tensor raw({cfg.read_raw_size()});
  raw[cfg.memory_width + 1] = 100.0;  // gate slot
  HeadVars head = decode_head_params(tape, tape.constant(raw), false, cfg);
  const double sig20 = 1.0 / (1.0 + std::exp(-20.0));
  CHECK(tape.value(head.gate)[0] == doctest::Approx(sig20).epsilon(1e-12));
}

TEST_CASE("decode rejects a wrong raw length with expected and actual") {
  NtmConfig cfg = small_config();
  Tape tape;
  Var raw = tape.constant(Tensor({cfg.read_raw_size() + 2}));
  try {
    decode_head_params(tape, raw, false, cfg);
    FAIL("expected ShapeError");
  } catch (const ShapeError& err) {
    const std::string what = err.what();
    CHECK(what.find(std::to_string(cfg.read_raw_size())) != std::string::npos);
    CHECK(what.find(std::to_string(cfg.read_raw_size() + 2)) != std::string::npos);
  }
}

TEST_CASE("decode output ranges hold for extreme raw inputs") {
  NtmConfig cfg = small_config();
  Rng rng(33);
  for (int draw = 0; draw < 50; ++draw) {
    Tape tape;
    Tensor raw({cfg.write_raw_size()});
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const double u = rng.uniform01();
      raw[i] = u < 0.2 ? 1e308 : (u < 0.4 ? -1e308 : rng.normal(0.0, 50.0));
    }
    HeadVars head = decode_head_params(tape, tape.constant(raw), true, cfg);
    for (std::size_t i = 0; i < cfg.memory_width; ++i) {
      CHECK(std::fabs(tape.value(head.key)[i]) <= 1.0);
      CHECK(std::fabs(tape.value(head.add)[i]) <= 1.0);
      CHECK(tape.value(head.erase)[i] >= 0.0);
      CHECK(tape.value(head.erase)[i] <= 1.0);
    }
    CHECK(tape.value(head.beta)[0] >= 0.0);
    CHECK(tape.value(head.gate)[0] >= 0.0);
    CHECK(tape.value(head.gate)[0] <= 1.0);
    CHECK(tape.value(head.gamma)[0] >= 1.0);
    check_simplex(tape.value(head.shift_dist), 1e-9);
  }
}

TEST_CASE("cosine similarity analytic cases") {
  Tape tape;
  auto cos = [&](std::initializer_list<double> a, std::initializer_list<double> b) {
    Var u = tape.constant(Tensor::of({2}, a));
    Var v = tape.constant(Tensor::of({2}, b));
    return tape.value(cosine_similarity(tape, u, v))[0];
  };
  CHECK(cos({1, 0}, {1, 0}) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(cos({1, 0}, {0, 1}) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(cos({1, 2}, {2, 4}) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(cos({1, 0}, {-1, 0}) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("content addressing analytic cases") {
  Tape tape;
  Tensor mem = Tensor::of({2, 2}, {1, 0, 0, 1});

  SUBCASE("beta = 0 gives the uniform weighting") {
    Var w = content_addressing(tape, tape.constant(mem),
                               tape.constant(Tensor::of({2}, {0.7, -0.4})),
                               tape.constant_scalar(0.0));
    CHECK(tape.value(w)[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(tape.value(w)[1] == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("equidistant key splits evenly") {
    Var w = content_addressing(tape, tape.constant(mem),
                               tape.constant(Tensor::of({2}, {1, 1})),
                               tape.constant_scalar(3.0));
    CHECK(tape.value(w)[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(tape.value(w)[1] == doctest::Approx(0.5).epsilon(1e-9));
  }

  SUBCASE("aligned key with beta 5 follows softmax([5, 0])") {
    Var w = content_addressing(tape, tape.constant(mem),
                               tape.constant(Tensor::of({2}, {1, 0})),
                               tape.constant_scalar(5.0));
    CHECK(tape.value(w)[0] == doctest::Approx(0.9933071490757152).epsilon(1e-6));
    CHECK(tape.value(w)[1] == doctest::Approx(0.0066928509242848).epsilon(1e-6));
  }
}

TEST_CASE("interpolation endpoints and midpoint") {
  Tape tape;
  Var wc = tape.constant(Tensor::of({2}, {1, 0}));
  Var wp = tape.constant(Tensor::of({2}, {0, 1}));
  CHECK(tape.value(interpolate(tape, wc, wp, tape.constant_scalar(1.0))) ==
        tape.value(wc));
  CHECK(tape.value(interpolate(tape, wc, wp, tape.constant_scalar(0.0))) ==
        tape.value(wp));
  Var mid = interpolate(tape, wc, wp, tape.constant_scalar(0.5));
  CHECK(tape.value(mid)[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(tape.value(mid)[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("shift moves mass by the kernel offsets, circularly") {
  Tape tape;
  Var w = tape.constant(Tensor::of({4}, {1, 0, 0, 0}));

  SUBCASE("one-hot at offset 0 is the identity") {
    Var s = tape.constant(Tensor::of({3}, {0, 1, 0}));
    CHECK(tape.value(shift(tape, w, s)) == tape.value(w));
  }
  SUBCASE("one-hot at offset +1 rotates forward") {
    Var s = tape.constant(Tensor::of({3}, {0, 0, 1}));
    CHECK(tape.value(shift(tape, w, s)) == Tensor::of({4}, {0, 1, 0, 0}));
  }
  SUBCASE("half at -1 and half at 0 wraps around") {
    Var s = tape.constant(Tensor::of({3}, {0.5, 0.5, 0}));
    CHECK(tape.value(shift(tape, w, s)) == Tensor::of({4}, {0.5, 0, 0, 0.5}));
  }
}

TEST_CASE("sharpening") {
  Tape tape;

  SUBCASE("gamma = 1 leaves an exact simplex unchanged") {
    Var w = tape.constant(Tensor::of({4}, {0.5, 0.25, 0.125, 0.125}));
    CHECK(tape.value(sharpen(tape, w, tape.constant_scalar(1.0))) == tape.value(w));
  }
  SUBCASE("symmetric input stays symmetric") {
    Var w = tape.constant(Tensor::of({2}, {0.5, 0.5}));
    Var out = sharpen(tape, w, tape.constant_scalar(7.3));
    CHECK(tape.value(out)[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(tape.value(out)[1] == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("gamma = 2 concentrates the weighting") {
    Var w = tape.constant(Tensor::of({2}, {0.8, 0.2}));
    Var out = sharpen(tape, w, tape.constant_scalar(2.0));
    CHECK(tape.value(out)[0] == doctest::Approx(0.64 / 0.68).epsilon(1e-9));
    CHECK(tape.value(out)[1] == doctest::Approx(0.04 / 0.68).epsilon(1e-9));
  }
}

TEST_CASE("address with neutral location ops returns w_prev exactly") {
  Tape tape;
  Rng rng(9);
  Tensor mem = random_tensor({4, 4}, rng);
  // Dyadic weights sum to exactly 1.0, so neutrality is bit-exact.
  Tensor prev = Tensor::of({4}, {0.5, 0.25, 0.125, 0.125});

  HeadVars head;
  head.key = tape.constant(random_tensor({4}, rng));
  head.beta = tape.constant_scalar(2.0);
  head.gate = tape.constant_scalar(0.0);
  head.shift_dist = tape.constant(Tensor::of({3}, {0, 1, 0}));
  head.gamma = tape.constant_scalar(1.0);

  Var w = address(tape, tape.constant(mem), head, tape.constant(prev));
  CHECK(tape.value(w) == prev);

  head.gate = tape.constant_scalar(1.0);
  Var w_c = content_addressing(tape, tape.constant(mem), head.key, head.beta);
  Var w2 = address(tape, tape.constant(mem), head, tape.constant(prev));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(tape.value(w2)[i] == doctest::Approx(tape.value(w_c)[i]).epsilon(1e-12));
  }
}

TEST_CASE("address output stays on the simplex (fuzz)") {
  Rng rng(123);
  NtmConfig cfg = small_config();
  for (int draw = 0; draw < 1000; ++draw) {
    Tape tape;
    Var mem = tape.constant(random_tensor({4, 4}, rng));
    Var prev = tape.constant(simplex_from(tape, rng, 4));
    Var raw = tape.constant(random_tensor({cfg.read_raw_size()}, rng, -30, 30));
    HeadVars head = decode_head_params(tape, raw, false, cfg);
    const Tensor& w = tape.value(address(tape, mem, head, prev));
    check_simplex(w);
  }
}

TEST_CASE("read is the attention-weighted row mix") {
  Tape tape;

  SUBCASE("one-hot reads a row exactly") {
    Tensor mem = Tensor::of({3, 2}, {1, 2, 3, 4, 5, 6});
    Var r = read_memory(tape, tape.constant(mem),
                        tape.constant(Tensor::of({3}, {0, 1, 0})));
    CHECK(tape.value(r) == Tensor::of({2}, {3, 4}));
  }
  SUBCASE("uniform over two rows averages them") {
    Tensor mem = Tensor::of({2, 2}, {1, 1, 3, 5});
    Var r = read_memory(tape, tape.constant(mem),
                        tape.constant(Tensor::of({2}, {0.5, 0.5})));
    CHECK(tape.value(r) == Tensor::of({2}, {2, 3}));
  }
  SUBCASE("weighted read from the addressing example") {
    Tensor mem = Tensor::of({2, 2}, {0, 4, 4, 0});
    Var r = read_memory(tape, tape.constant(mem),
                        tape.constant(Tensor::of({2}, {0.25, 0.75})));
    CHECK(tape.value(r) == Tensor::of({2}, {3, 1}));
  }
}

TEST_CASE("write applies erase then add") {
  Tape tape;

  SUBCASE("one-hot with full erase overwrites one row") {
    Tensor mem = Tensor::of({2, 2}, {1, 2, 3, 4});
    Var out = write_memory(tape, tape.constant(mem),
                           tape.constant(Tensor::of({2}, {0, 1})),
                           tape.constant(Tensor::of({2}, {1, 1})),
                           tape.constant(Tensor::of({2}, {-0.5, 0.75})));
    CHECK(tape.value(out) == Tensor::of({2, 2}, {1, 2, -0.5, 0.75}));
  }
  SUBCASE("zero erase and zero add is the exact identity") {
    Rng rng(4);
    Tensor mem = random_tensor({4, 3}, rng);
    Var out = write_memory(tape, tape.constant(mem),
                           tape.constant(Tensor::of({4}, {0.25, 0.25, 0.25, 0.25})),
                           tape.constant(Tensor({3})), tape.constant(Tensor({3})));
    CHECK(tape.value(out) == mem);
  }
  SUBCASE("partial erase and add from the worked example") {
    Tensor mem = Tensor::of({2, 2}, {2, 2, 3, 3});
    Var out = write_memory(tape, tape.constant(mem),
                           tape.constant(Tensor::of({2}, {1, 0})),
                           tape.constant(Tensor::of({2}, {0.5, 0.5})),
                           tape.constant(Tensor::of({2}, {1, 1})));
    CHECK(tape.value(out) == Tensor::of({2, 2}, {2, 2, 3, 3}));
  }
}

TEST_CASE("write keeps every cell within the |M| + 1 growth bound") {
  Rng rng(77);
  Tape tape;
  NtmConfig cfg = small_config();
  for (int draw = 0; draw < 200; ++draw) {
    Tensor mem = random_tensor({4, 4}, rng, -3.0, 3.0);
    Tensor w = simplex_from(tape, rng, 4);
    Tensor e = random_tensor({4}, rng, 0.0, 1.0);
    Tensor a = random_tensor({4}, rng, -1.0, 1.0);
    Var out = write_memory(tape, tape.constant(mem), tape.constant(w),
                           tape.constant(e), tape.constant(a));
    const Tensor& m2 = tape.value(out);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        CHECK(std::fabs(m2.at(i, j)) <= std::fabs(mem.at(i, j)) + 1.0 + 1e-12);
      }
    }
  }
}

TEST_CASE("init_state realizes the three schemes") {
  NtmConfig cfg = small_config();
  cfg.memory_rows = 3;
  cfg.memory_width = 2;
  Rng rng(5);

  SUBCASE("constant fills the memory with 1e-6") {
    NtmModel model(cfg, 8, 1, 3, 2, 42);
    Tape tape;
    Bindings b = bind(tape, model.params());
    NtmStateVars state = model.init_state(tape, b, rng);
    const Tensor& m = tape.value(state.memory);
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(m[i] == 1e-6);
  }

  SUBCASE("zero logits give uniform w0 and zero r0") {
    NtmModel model(cfg, 8, 1, 3, 2, 42);
    Tape tape;
    Bindings b = bind(tape, model.params());
    NtmStateVars state = model.init_state(tape, b, rng);
    for (const Var& w : state.weights) {
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(tape.value(w)[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
      }
    }
    for (const Var& r : state.reads) {
      for (std::size_t i = 0; i < 2; ++i) CHECK(tape.value(r)[i] == 0.0);
    }
  }

  SUBCASE("random draws stay within two standard deviations") {
    cfg.init_scheme = InitScheme::kRandom;
    NtmModel model(cfg, 8, 1, 3, 2, 42);
    Tape tape;
    Bindings b = bind(tape, model.params());
    NtmStateVars state = model.init_state(tape, b, rng);
    const Tensor& m = tape.value(state.memory);
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(std::fabs(m[i]) <= 2.0 * kRandomInitSd);
    }
  }

  SUBCASE("random resamples on every init, deterministically per stream") {
    cfg.init_scheme = InitScheme::kRandom;
    NtmModel model(cfg, 8, 1, 3, 2, 42);
    Tape tape;
    Bindings b = bind(tape, model.params());
    Rng s1(99);
    NtmStateVars first = model.init_state(tape, b, s1);
    NtmStateVars second = model.init_state(tape, b, s1);
    CHECK_FALSE(tape.value(first.memory) == tape.value(second.memory));
    Rng s2(99);
    NtmStateVars replay = model.init_state(tape, b, s2);
    CHECK(tape.value(first.memory) == tape.value(replay.memory));
  }

  SUBCASE("learned memory is the trainable parameter") {
    cfg.init_scheme = InitScheme::kLearned;
    NtmModel model(cfg, 8, 1, 3, 2, 42);
    Tape tape;
    Bindings b = bind(tape, model.params());
    NtmStateVars state = model.init_state(tape, b, rng);
    CHECK(tape.value(state.memory) == model.params().value("init.m0"));
  }
}

TEST_CASE("parameter accounting across schemes and head counts") {
  NtmConfig cfg;
  cfg.memory_rows = 16;
  cfg.memory_width = 8;
  cfg.num_read_heads = 2;
  cfg.num_write_heads = 3;

  NtmModel constant_model(cfg, 12, 1, 5, 4, 7);
  cfg.init_scheme = InitScheme::kLearned;
  NtmModel learned_model(cfg, 12, 1, 5, 4, 7);

  const std::size_t n = cfg.memory_rows, w = cfg.memory_width;
  const std::size_t hr = cfg.num_read_heads, hw = cfg.num_write_heads;
  CHECK(learned_model.params().total_scalars() ==
        constant_model.params().total_scalars() + n * w);

  std::size_t init_scalars = 0;
  for (const std::string& name : constant_model.params().names()) {
    if (name.rfind("init.", 0) == 0) {
      init_scalars += constant_model.params().value(name).size();
    }
  }
  CHECK(init_scalars == w * hr + n * (hr + hw));
}

TEST_CASE("cell step with all-zero parameters emits the bias logits") {
  NtmConfig cfg = small_config();
  NtmModel model(cfg, 8, 1, 3, 2, 11);
  for (const std::string& name : model.params().names()) {
    Tensor& p = model.params().value(name);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = 0.0;
  }
  Rng rng(1);
  Tape tape;
  Bindings b = bind(tape, model.params());
  NtmStateVars state = model.init_state(tape, b, rng);
  std::vector<LstmLayerVars> layers = {bind_lstm_layer(b, "ctrl.l0", 8)};
  auto ctrl = zero_lstm_state(tape, layers);
  auto out = model.cell_step(tape, b, tape.constant(Tensor::of({3}, {1, 0, 1})),
                             state, ctrl);
  for (std::size_t i = 0; i < 2; ++i) CHECK(tape.value(out.output)[i] == 0.0);
  for (const Var& w : out.state.weights) check_simplex(tape.value(w));
}

TEST_CASE("cell state invariants hold across 100 random steps") {
  NtmConfig cfg = small_config();
  cfg.memory_rows = 6;
  cfg.memory_width = 5;
  NtmModel model(cfg, 10, 1, 4, 3, 19);
  Rng rng(55);

  Tape tape;
  Bindings b = bind(tape, model.params());
  NtmStateVars state = model.init_state(tape, b, rng);
  std::vector<LstmLayerVars> layers = {bind_lstm_layer(b, "ctrl.l0", 10)};
  auto ctrl = zero_lstm_state(tape, layers);
  for (int step = 0; step < 100; ++step) {
    Var x = tape.constant(random_tensor({4}, rng, 0.0, 1.0));
    auto out = model.cell_step(tape, b, x, state, ctrl);
    state = out.state;
    ctrl = out.controller;
    for (const Var& w : state.weights) check_simplex(tape.value(w));
    CHECK(tape.value(state.memory).all_finite());
    for (const Var& r : state.reads) CHECK(tape.value(r).all_finite());
  }
}

TEST_CASE("full cell gradients match finite differences") {
  TaskConfig task;
  task.kind = TaskKind::kCopy;
  task.bits = 3;
  task.len_min = 2;
  task.len_max = 2;

  NtmConfig cfg;
  cfg.memory_rows = 8;
  cfg.memory_width = 4;

  SUBCASE("constant scheme") {
    NtmModel model(cfg, 8, 1, task.input_dim(), task.output_dim(), 5);
    Rng rng(21);
    Episode ep = gen_copy(task, rng);
    auto res = model_gradcheck(model, ep);
    CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
  }
  SUBCASE("learned scheme propagates into the memory init") {
    cfg.init_scheme = InitScheme::kLearned;
    NtmModel model(cfg, 8, 1, task.input_dim(), task.output_dim(), 2);
    Rng rng(21);
    Episode ep = gen_copy(task, rng);

    Tape tape;
    Bindings b = bind(tape, model.params());
    Rng err(777);
    Var logits = model.build_episode(tape, b, ep, err);
    Gradients g = tape.backward(masked_bce_loss(tape, logits, ep.targets, ep.mask));
    double m0_norm = 0.0;
    for (std::size_t i = 0; i < g.at("init.m0").size(); ++i) {
      m0_norm += std::fabs(g.at("init.m0")[i]);
    }
    CHECK(m0_norm > 0.0);

    auto res = model_gradcheck(model, ep);
    CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
  }
}

TEST_SUITE_END();
