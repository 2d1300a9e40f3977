// Command-line driver: training, activation capture and the probing analyses.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "topo/error.hpp"
#include "topo/io.hpp"
#include "topo/pipeline.hpp"

namespace pl = topo::pipeline;

namespace {

void add_conditions(CLI::App* cmd, pl::ConditionInputs& in) {
  cmd->add_option("--a", in.a, "Dump for condition A");
  cmd->add_option("--b", in.b, "Dump for condition B");
  cmd->add_option("--x", in.x, "Single dump to split by --labels");
  cmd->add_option("--labels", in.labels, "Corpus TSV whose labels split --x (1 = condition A)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topographic transformer toolkit"};
  app.set_version_flag("--version", std::string(topo::io::kToolVersion));
  app.require_subcommand(1);

  pl::TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier from a JSON config");
  train_cmd->add_option("--config", train.config, "Training config (JSON)")->required();
  train_cmd->add_option("--seed", train.seed, "Override the config seed");
  train_cmd->add_option("--out", train.out_dir, "Output directory")->capture_default_str();

  pl::CaptureOptions capture;
  auto* capture_cmd = app.add_subcommand("capture", "Dump token-averaged sublayer activations");
  capture_cmd->add_option("--checkpoint", capture.checkpoint, "Trained checkpoint")->required();
  capture_cmd->add_option("--corpus", capture.corpus, "Sentences (TSV label<TAB>text)")->required();
  capture_cmd->add_option("--sublayer", capture.sublayer, "queries|keys|values|fc_out|all")
      ->capture_default_str();
  capture_cmd->add_option("--layer", capture.layer, "Encoder block; negative counts from the end")
      ->capture_default_str();
  capture_cmd->add_option("--unk-threshold", capture.unk_threshold,
                          "Warn when this fraction of tokens is unknown")
      ->capture_default_str();
  capture_cmd->add_option("--out", capture.out_dir, "Output directory")->capture_default_str();

  auto* analyze = app.add_subcommand("analyze", "Probing analyses on activation dumps");
  analyze->require_subcommand(1);

  pl::SelectivityOptions sel;
  auto* sel_cmd = analyze->add_subcommand("selectivity", "Per-unit two-condition s-values");
  add_conditions(sel_cmd, sel.inputs);
  sel_cmd->add_option("--range", sel.range, "Colormap clamp (symmetric)")->capture_default_str();
  sel_cmd->add_option("--out", sel.out_dir, "Output directory")->capture_default_str();

  pl::PcaOptions pca;
  auto* pca_cmd = analyze->add_subcommand("pca", "Principal components of a dump");
  pca_cmd->add_option("--x", pca.x, "Activation dump")->required();
  pca_cmd->add_option("--components", pca.components, "Components to keep")->capture_default_str();
  pca_cmd->add_option("--out", pca.out_dir, "Output directory")->capture_default_str();

  pl::TopoOptions topo_opts;
  auto* topo_cmd = analyze->add_subcommand("topo", "Generic topography statistic with permutation null");
  topo_cmd->add_option("--x", topo_opts.x, "Activation dump")->required();
  topo_cmd->add_option("--n-perm", topo_opts.n_perm, "Permutations")->capture_default_str();
  topo_cmd->add_option("--seed", topo_opts.seed, "Permutation seed")->capture_default_str();
  topo_cmd->add_flag("--global", topo_opts.global, "Single all-pairs statistic");
  topo_cmd->add_option("--out", topo_opts.out_dir, "Output directory")->capture_default_str();

  pl::DecodeOptions dec;
  auto* dec_cmd = analyze->add_subcommand("decode", "Held-out logistic decoding on PCs");
  add_conditions(dec_cmd, dec.inputs);
  dec_cmd->add_option("--components", dec.components, "PCs fed to the decoder")->capture_default_str();
  dec_cmd->add_option("--split", dec.split, "Train fraction")->capture_default_str();
  dec_cmd->add_option("--seed", dec.seed, "Split seed")->capture_default_str();
  dec_cmd->add_option("--out", dec.out_dir, "Output directory")->capture_default_str();

  pl::AlignOptions align;
  auto* align_cmd = app.add_subcommand("align", "PLS-SVD alignment of two dumps");
  align_cmd->add_option("--x", align.x, "First dump")->required();
  align_cmd->add_option("--y", align.y, "Second dump (heatmaps use its weights)")->required();
  align_cmd->add_option("--components", align.components, "Components")->capture_default_str();
  align_cmd->add_option("--split", align.split, "Train fraction")->capture_default_str();
  align_cmd->add_option("--seed", align.seed, "Split seed")->capture_default_str();
  align_cmd->add_option("--out", align.out_dir, "Output directory")->capture_default_str();

  pl::EncodeOptions enc;
  auto* enc_cmd = app.add_subcommand("encode", "Ridge encoding model with leave-one-out lambda");
  enc_cmd->add_option("--x", enc.x, "Model embeddings dump")->required();
  enc_cmd->add_option("--y", enc.y, "Response dump, one target per column")->required();
  enc_cmd->add_option("--lambdas", enc.lambdas, "Candidate penalties")->delimiter(',');
  enc_cmd->add_option("--split", enc.split, "Train fraction")->capture_default_str();
  enc_cmd->add_option("--seed", enc.seed, "Split seed")->capture_default_str();
  enc_cmd->add_option("--out", enc.out_dir, "Output directory")->capture_default_str();

  pl::SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Receptive-field sweep over r_sq x r_sr");
  sweep_cmd->add_option("--config", sweep.config, "Base training config (JSON)")->required();
  sweep_cmd->add_option("--r-sq", sweep.r_sq, "r_sq grid")->delimiter(',');
  sweep_cmd->add_option("--r-sr", sweep.r_sr, "r_sr grid")->delimiter(',');
  sweep_cmd->add_option("--threads", sweep.threads, "Worker threads")->capture_default_str();
  sweep_cmd->add_option("--out", sweep.out_dir, "Output directory")->capture_default_str();

  pl::SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic separable corpus");
  synth_cmd->add_option("--sentences", synth.sentences, "Sentence count")->capture_default_str();
  synth_cmd->add_option("--cue-words", synth.cue_words, "Cue words per class")->capture_default_str();
  synth_cmd->add_option("--filler-words", synth.filler_words, "Shared filler words")
      ->capture_default_str();
  synth_cmd->add_option("--min-len", synth.min_len, "Shortest sentence")->capture_default_str();
  synth_cmd->add_option("--max-len", synth.max_len, "Longest sentence")->capture_default_str();
  synth_cmd->add_option("--cue-rate", synth.cue_rate, "Probability a word is a class cue")
      ->capture_default_str();
  synth_cmd->add_option("--negation-rate", synth.negation_rate,
                        "Probability a sentence carries a meaning-inverting 'not'")
      ->capture_default_str();
  synth_cmd->add_option("--local-negation-rate", synth.local_negation_rate,
                        "Probability a single cue is preceded by 'not' and inverted")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output TSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    std::ostream& log = std::cerr;
    if (*train_cmd) pl::train_command(train, log);
    else if (*capture_cmd) pl::capture_command(capture, log);
    else if (*sel_cmd) pl::selectivity_command(sel, log);
    else if (*pca_cmd) pl::pca_command(pca, log);
    else if (*topo_cmd) pl::topo_command(topo_opts, log);
    else if (*dec_cmd) pl::decode_command(dec, log);
    else if (*align_cmd) pl::align_command(align, log);
    else if (*enc_cmd) pl::encode_command(enc, log);
    else if (*sweep_cmd) pl::sweep_command(sweep, log);
    else if (*synth_cmd) pl::synth_command(synth, log);
  } catch (const topo::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pl::exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
