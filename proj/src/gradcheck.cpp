// SPDX-License-Identifier: Apache-2.0
#include "ftmp/gradcheck.hpp"

#include <cmath>
#include <random>

#include "ftmp/model3e.hpp"
#include "ftmp/tm_only.hpp"

namespace ftmp {

ModelGradCheck grad_check_model(Model& model, std::span<const Example> batch, std::span<const Real> coef,
                                double eps, std::uint64_t seed) {
  auto named = model.named_parameters();
  model.zero_grad();
  model.accumulate_gradients(batch, coef);

  // Per example, L_up - L_down = log(sum_k p_k exp(dz_k)) - dz_y with p the
  // softmax at the lower point and dz the logit difference.
  auto diff = [&](const Mat& up, const Mat& down) -> Real {
    const Mat probs = nc::softmax(down);
    Real d = 0;
    for (Eigen::Index j = 0; j < up.cols(); ++j) {
      const Vec dz = up.col(j) - down.col(j);
      Real s = 0;
      for (Eigen::Index k = 0; k < dz.size(); ++k) s += probs(k, j) * std::expm1(dz(k));
      d += coef[static_cast<std::size_t>(j)] * (std::log1p(s) - dz(index_of(batch[static_cast<std::size_t>(j)].label)));
    }
    return d;
  };
  nc::GradCheckOptions opt;
  opt.eps = eps;
  opt.seed = seed;
  opt.max_coords_per_param = std::numeric_limits<nc::Index>::max();
  auto params = model.parameters();
  const auto res = nc::grad_check_diff<Real>([&] { return model.logits(batch); }, diff, params, opt);

  ModelGradCheck out;
  out.model = std::string(name_of(model.kind()));
  out.max_rel_error = res.max_rel_error;
  out.worst_param = named.empty() ? "" : named[res.worst_param].name;
  out.coords_checked = res.coords_checked;
  out.num_params = model.num_parameters();
  return out;
}

std::vector<Example> random_examples(int n, int w, int vocab_size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::vector<Example> out;
  for (int i = 0; i < n; ++i) {
    Example ex;
    const int pads = uni(0, w - 1);
    ex.window.resize(static_cast<std::size_t>(pads));
    for (int j = pads; j < w; ++j) {
      ContextElement c;
      c.speaker_change = j == pads ? 1 : uni(0, 1);
      const int len = uni(0, 5);
      for (int k = 0; k < len; ++k) c.tokens.push_back(uni(0, vocab_size - 1));
      c.move = uni(0, kNumTalkMoves - 1);
      c.utterance_idx = j;
      ex.window.push_back(std::move(c));
    }
    ex.label = talk_move_from_index(uni(0, kNumTalkMoves - 1));
    ex.origin = {"t" + std::to_string(i), static_cast<std::size_t>(w - 1)};
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<ModelGradCheck> tiny_grad_check(std::uint64_t seed, double eps) {
  constexpr int kVocab = 12, kWindow = 3, kBatch = 6;
  const auto batch = random_examples(kBatch, kWindow, kVocab, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> wdist(0.2, 2.0);
  std::vector<Real> coef(kBatch);
  for (auto& c : coef) c = wdist(rng);

  std::vector<ModelGradCheck> out;
  {
    Model3EParams p(Model3EDims::tiny(kVocab));
    p.init(seed);
    Model3E m(std::move(p));
    out.push_back(grad_check_model(m, batch, coef, eps, seed));
  }
  {
    TmOnlyParams p(TmOnlyDims{3, 5}, true);
    p.init(seed);
    TmOnlyModel m(std::move(p));
    out.push_back(grad_check_model(m, batch, coef, eps, seed));
  }
  return out;
}

}  // namespace ftmp
