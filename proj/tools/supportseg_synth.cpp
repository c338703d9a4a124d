// Synthetic models, walking bundles and transition corpora.
#include <iostream>

#include <CLI11.hpp>

#include "supportseg/synth.hpp"

namespace fs = std::filesystem;
using namespace supportseg;
using synth::BundleSpec;
using synth::GaitOptions;

namespace {

// "120:260" -> {120, 260}
std::pair<long, long> ParseInterval(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ValidationError("expected ON:OFF, got '" + s + "'");
  return {std::stol(s.substr(0, colon)), std::stol(s.substr(colon + 1))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic data for supportseg"};
  app.require_subcommand(1);

  std::string kind = "humanoid40";
  fs::path out;
  CLI::App* model = app.add_subcommand("model", "Write a model spec document");
  model->add_option("kind", kind, "humanoid40 or six-dof")->check(CLI::IsMember({"humanoid40", "six-dof"}));
  model->add_option("--out", out, "Output file")->required();

  GaitOptions gait;
  BundleSpec spec{"walk", "locomotion", "synthetic walk", false, false, true};
  std::vector<std::string> hands;
  CLI::App* walk = app.add_subcommand("walk", "Write a walking bundle for the humanoid model");
  walk->add_option("--out", out, "Bundle directory")->required();
  walk->add_option("--id", spec.id, "Motion id");
  walk->add_option("--category", spec.category, "Motion category");
  walk->add_option("--seed", gait.seed, "Schedule seed");
  walk->add_option("--single-supports", gait.single_supports, "Number of single-support phases");
  walk->add_option("--speed", gait.speed_mm_per_frame, "Forward speed, mm/frame (0 steps in place)");
  walk->add_option("--hand", hands, "Left-hand wall contact ON:OFF (frames, half-open)");
  walk->add_flag("--wall", spec.wall, "Add the wall object");
  walk->add_flag("--box", spec.moving_box, "Add a moving box object");

  long frames = 1000;
  CLI::App* perf = app.add_subcommand("perf", "Walking bundle with floor, wall and a moving box");
  perf->add_option("--out", out, "Bundle directory")->required();
  perf->add_option("--frames", frames, "Number of frames");

  std::uint64_t seed = 7;
  CLI::App* corpus = app.add_subcommand("corpus", "Sequence documents realising the reference transition table");
  corpus->add_option("--out", out, "Output directory")->required();
  corpus->add_option("--seed", seed, "Shuffle seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*model) {
      WriteTextFile(out, EmitModelSpec(kind == "six-dof" ? synth::SixDofFixture() : synth::Humanoid40()));
    } else if (*walk) {
      for (const std::string& h : hands) gait.left_hand_contacts.push_back(ParseInterval(h));
      if (!gait.left_hand_contacts.empty()) spec.wall = true;
      const KinematicModel humanoid = synth::Humanoid40();
      std::cout << synth::WriteBundle(out, spec, humanoid, synth::GenerateWalk(humanoid, gait)).string() << "\n";
    } else if (*perf) {
      const KinematicModel humanoid = synth::Humanoid40();
      const synth::ScriptedMotion motion = synth::WalkOfLength(humanoid, gait, static_cast<std::size_t>(frames));
      spec = {"perf", "locomotion", "1000-frame walk with two objects", true, true, false};
      std::cout << synth::WriteBundle(out, spec, humanoid, motion).string() << "\n";
    } else if (*corpus) {
      for (const TransitionSequence& s : synth::BuildCorpus(synth::ReferenceTransitionCells(), "locomotion", seed))
        WriteTextFile(out / (s.motion_id + ".json"), EmitSequence(s));
    }
  } catch (const std::exception& e) {
    std::cerr << "supportseg_synth: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
