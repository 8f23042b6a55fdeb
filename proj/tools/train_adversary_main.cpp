// Trains the learnt adversary with the antithetic evolution strategy and
// writes the best parameters (and optionally the training curve).

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "safeset/vehicle.hpp"

namespace vehicle = safeset::vehicle;

int main(int argc, char** argv) {
  CLI::App app{"Evolution-strategy training for the learnt adversary"};

  std::string out_path = "assets/pi_e_theta.txt";
  std::string curve_path;
  std::string subject = "follow";
  std::uint64_t seed = 1;
  vehicle::EsParams es;

  app.add_option("--out", out_path, "where to write the trained parameters");
  app.add_option("--curve", curve_path, "optional training-curve CSV");
  app.add_option("--subject", subject, "subject controller: follow | lane-changing | mixed");
  app.add_option("--seed", seed, "training seed");
  app.add_option("--iterations", es.iterations, "training iterations");
  app.add_option("--population", es.population, "population size (even)");
  app.add_option("--sigma", es.sigma, "perturbation scale");
  app.add_option("--lr", es.lr, "learning rate");
  app.add_option("--episodes", es.episodes_per_member, "episodes per member");
  app.add_option("--eval-episodes", es.eval_episodes, "fixed evaluation episodes");
  app.add_option("--k", es.k, "steps per episode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const vehicle::VehicleParams vp;
    const vehicle::SubjectKind kind = vehicle::subject_from_name(subject);
    const vehicle::TrainResult result = vehicle::es_train(vp, kind, es, seed);
    vehicle::save_net(result.theta, out_path);
    if (!curve_path.empty()) {
      std::ofstream curve(curve_path);
      if (!curve) throw std::runtime_error("cannot write " + curve_path);
      vehicle::write_curve_csv(result.curve, curve);
    }
    double final_eval = 0.0;
    if (!result.curve.empty()) final_eval = result.curve.back().best_eval;
    std::cout << "trained " << result.theta.size() << " parameters over " << es.iterations
              << " iterations; best evaluation reward " << final_eval << "; wrote " << out_path
              << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
