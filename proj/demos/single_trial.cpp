// Runs one interactive trial of a random pair and prints where they ended up
// and how much of the neural output space each visited.

#include <cstdio>

#include "dyad/experiments.hpp"

int main() {
  using namespace dyad;
  genome::Rng rng(42);
  const auto genotype = genome::random_genotype(experiments::genotype_length(experiments::Condition::Interactive), rng);
  const auto agents = genome::decode(genotype);

  std::array<entropy::Histogram3D, 2> hist;
  experiments::StepRecord last[2];
  experiments::TrialSpec spec;
  experiments::run_trial_interactive(agents[0], agents[1], spec,
                                     [&](std::size_t agent, std::size_t, const experiments::StepRecord& r) {
                                       hist[agent].accumulate(r.neural);
                                       last[agent] = r;
                                     });
  for (int a = 0; a < 2; ++a) {
    std::printf("agent %d: end (%.3f, %.3f) heading %.3f, normalized neural entropy %.4f\n", a,
                last[a].center.x, last[a].center.y, last[a].heading,
                entropy::normalized_entropy(hist[a]).value);
  }
}
