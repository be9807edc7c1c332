#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "nertag/cli.hpp"
#include "nertag/conll_io.hpp"
#include "nertag/training.hpp"
#include "reference_tables.hpp"

namespace fs = std::filesystem;
using namespace nertag;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Exit status of the real binary.
int run_binary(const std::string& args) {
  const std::string command = std::string(NERTAG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("nertag_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(file(name)) << content;
    return file(name);
  }

 private:
  fs::path path_;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, double> parse_kv(const std::string& text) {
  std::map<std::string, double> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) out[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  return out;
}

const char* kTrain =
    "# id t1\nAnn _ _ B-PER\nlives _ _ O\nin _ _ O\nRome _ _ B-LOC\n\n"
    "# id t2\nBob _ _ B-PER\nLee _ _ I-PER\nleft _ _ O\nParis _ _ B-LOC\n\n"
    "# id t3\nthe _ _ O\nAcme _ _ B-CORP\nInc _ _ I-CORP\nsells _ _ O\nWidgets _ _ B-PROD\n\n";

std::string block(const std::string& id, const std::string& gold_tag) {
  return "# id " + id + "\nw _ _ " + gold_tag + "\n\n";
}

}  // namespace

TEST_CASE("help and usage errors") {
  for (const char* cmd : {"train", "predict", "evaluate", "inspect"}) {
    const auto r = run({cmd, "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("--config") != std::string::npos);
  }
  const auto help = run({"train", "--help"});
  for (const char* needle : {"10", "256", "512", "1e-06", "0.0001", "0.3", "0.2-0.5", "--lr-min", "--seed"}) {
    CAPTURE(needle);
    CHECK(help.out.find(needle) != std::string::npos);
  }
  CHECK(run({"train", "--bogus"}).code == 1);
  CHECK(run({}).code == 1);
  CHECK(run({"fly"}).code == 1);
  CHECK(run({"evaluate", "--gold", "x"}).code == 1);
  CHECK(run({"train", "--train-file", "a", "--dev-file", "b", "--checkpoint", "c", "--epochs", "0"}).code == 1);

  CHECK(run_binary("--help") == 0);
  CHECK(run_binary("predict --help") == 0);
  CHECK(run_binary("train --no-such-flag") == 1);
}

TEST_CASE("train, predict, evaluate and inspect") {
  TempDir dir;
  const std::string train = dir.write("train.conll", kTrain);
  const std::string ckpt = dir.file("model.ckpt");

  SUBCASE("missing dev file") {
    const auto r = run({"train", "--train-file", train, "--dev-file", dir.file("nope.conll"), "--checkpoint", ckpt});
    CHECK(r.code == 2);
    CHECK(r.err.find("nope.conll") != std::string::npos);
    CHECK_FALSE(fs::exists(ckpt));
  }

  SUBCASE("unknown tag in the training file") {
    const std::string bad = dir.write("bad.conll", "New B-XYZ\n");
    const auto r = run({"train", "--train-file", bad, "--dev-file", bad, "--checkpoint", ckpt});
    CHECK(r.code == 2);
    CHECK(r.err.find("B-XYZ") != std::string::npos);
  }

  SUBCASE("full flow, all architectures") {
    for (const char* arch : {"crf", "bilstm-crf", "linear"}) {
      CAPTURE(arch);
      const std::vector<std::string> args = {"train", "--train-file", train, "--dev-file", train,
                                             "--checkpoint", ckpt, "--arch", arch, "--epochs", "3",
                                             "--hidden", "4", "--fc-size", "6", "--embedding-dim", "5"};
      const auto trained = run(args);
      REQUIRE(trained.code == 0);
      CHECK(fs::exists(ckpt));
      CHECK(trained.out.find("Average") != std::string::npos);
      const std::string log = read_file(ckpt + ".log");
      CHECK(std::count(log.begin(), log.end(), '\n') == 3);
      const std::string first = read_file(ckpt);

      // Same seed, same bytes.
      REQUIRE(run(args).code == 0);
      CHECK(read_file(ckpt) == first);

      const std::string out = dir.file("pred.conll");
      REQUIRE(run({"predict", "--checkpoint", ckpt, "--input", train, "--output", out, "--constrained"}).code == 0);
      const TagVocabulary voc = expand_bio(EntityTypeSet::Defaults());
      std::ifstream pred_in(out);
      const Corpus predicted = parse_conll(pred_in, voc);
      CHECK(predicted.size() == 3);
      for (const auto& s : predicted.sentences()) CHECK(count_invalid_transitions(voc, *s.gold_tags) == 0);

      const auto evaluated = run({"evaluate", "--gold", train, "--pred", out, "--format", "kv"});
      REQUIRE(evaluated.code == 0);
      const auto kv = parse_kv(evaluated.out);
      CHECK(kv.count("macro.f1") == 1);

      const auto inspected = run({"inspect", "--gold", train, "--pred", out, "--format", "kv"});
      REQUIRE(inspected.code == 0);
      const auto ikv = parse_kv(inspected.out);
      CHECK(ikv.at("total.tp") == kv.at("total.tp"));
      CHECK(ikv.at("total.fp") == kv.at("total.fp"));
      CHECK(ikv.at("total.fn") == kv.at("total.fn"));
    }
  }

  SUBCASE("config file with flag overrides") {
    const std::string config = dir.write("run.cfg",
                                         "# tiny run\narch = linear\nepochs=2\nfc_size=4\nembedding_dim=3\n"
                                         "train_file=" + train + "\ndev_file=" + train + "\n");
    const auto r = run({"train", "--config", config, "--checkpoint", ckpt, "--epochs", "1"});
    REQUIRE(r.code == 0);
    const auto c = train::load_checkpoint(ckpt);
    CHECK(c.config.arch == train::Architecture::kLinear);
    CHECK(c.config.epochs == 1);
    CHECK(c.config.fc_size == 4);
    CHECK(cli::read_config_args(config).front() == "--arch=linear");
    CHECK(run({"train", "--config", dir.file("missing.cfg")}).code != 0);
  }

  SUBCASE("checkpoint and vocabulary mismatch") {
    REQUIRE(run({"train", "--train-file", train, "--dev-file", train, "--checkpoint", ckpt, "--epochs", "1",
                 "--embedding-dim", "3"}).code == 0);
    const std::string small = dir.write("small.conll", "# id q\nAnn _ _ B-PER\n\n");
    const auto r = run({"predict", "--checkpoint", ckpt, "--input", small, "--types", "PER"});
    CHECK(r.code == 2);
    CHECK(r.err.find("tags") != std::string::npos);
  }
}

TEST_CASE("memorized sentence is reproduced by predict") {
  TempDir dir;
  const std::string one = dir.write("one.conll", "# id m\nAda _ _ B-PER\nLovelace _ _ I-PER\nmet _ _ O\nBabbage _ _ B-PER\n\n");
  const std::string ckpt = dir.file("m.ckpt");
  REQUIRE(run({"train", "--train-file", one, "--dev-file", one, "--checkpoint", ckpt, "--epochs", "100",
               "--lr-min", "1e-3", "--lr-max", "1e-1"}).code == 0);
  const auto r = run({"predict", "--checkpoint", ckpt, "--input", one});
  REQUIRE(r.code == 0);
  CHECK(r.out == read_file(one));
}

TEST_CASE("evaluate reproduces the Spanish per-class table from counts") {
  // Integer (tp, fp, fn) per class whose rates round to the published cells.
  const std::vector<std::tuple<std::string, int, int, int>> counts = {
      {"LOC", 241, 47, 33}, {"PER", 223, 23, 24}, {"PROD", 115, 50, 39},
      {"GRP", 66, 17, 18},  {"CW", 137, 35, 55},  {"CORP", 116, 18, 25}};
  std::string gold, pred;
  std::vector<std::pair<std::string, std::string>> blocks;
  int id = 0;
  for (const auto& [type, tp, fp, fn] : counts) {
    for (int i = 0; i < tp; ++i, ++id) blocks.emplace_back(block(std::to_string(id), "B-" + type), block(std::to_string(id), "B-" + type));
    for (int i = 0; i < fp; ++i, ++id) blocks.emplace_back(block(std::to_string(id), "O"), block(std::to_string(id), "B-" + type));
    for (int i = 0; i < fn; ++i, ++id) blocks.emplace_back(block(std::to_string(id), "B-" + type), block(std::to_string(id), "O"));
  }
  for (const auto& [g, p] : blocks) {
    gold += g;
    pred += p;
  }
  TempDir dir;
  const std::string gold_path = dir.write("gold.conll", gold);
  const std::string pred_path = dir.write("pred.conll", pred);
  const auto r = run({"evaluate", "--gold", gold_path, "--pred", pred_path, "--format", "kv"});
  REQUIRE(r.code == 0);
  const auto kv = parse_kv(r.out);
  for (const auto& row : reference::kSpanish.rows) {
    CHECK(std::abs(kv.at(std::string(row.type) + ".precision") - row.precision) <= 5e-5);
    CHECK(std::abs(kv.at(std::string(row.type) + ".recall") - row.recall) <= 5e-5);
    CHECK(std::abs(kv.at(std::string(row.type) + ".f1") - row.f1) <= reference::kCellTolerance);
  }
  CHECK(std::abs(kv.at("macro.precision") - 0.8163) <= reference::kMacroTolerance);
  CHECK(std::abs(kv.at("macro.recall") - 0.8085) <= reference::kMacroTolerance);
  CHECK(std::abs(kv.at("macro.f1") - 0.8117) <= reference::kMacroTolerance);

  const auto text = run({"evaluate", "--gold", gold_path, "--pred", pred_path});
  CHECK(text.out.find("Average") != std::string::npos);
  CHECK(text.out.find("0.8117") != std::string::npos);

  // Shuffled predicted file: alignment by id gives the same report.
  std::mt19937_64 rng(5);
  std::shuffle(blocks.begin(), blocks.end(), rng);
  std::string shuffled;
  for (const auto& [g, p] : blocks) shuffled += p;
  const std::string shuffled_path = dir.write("shuffled.conll", shuffled);
  CHECK(run({"evaluate", "--gold", gold_path, "--pred", shuffled_path, "--format", "kv"}).out == r.out);
}

TEST_CASE("inspect") {
  TempDir dir;
  const std::string gold = dir.write("gold.conll", "# id a\nAnn _ _ B-PER\nLee _ _ I-PER\nran _ _ O\n\n");
  SUBCASE("identity") {
    const auto r = run({"inspect", "--gold", gold, "--pred", gold});
    REQUIRE(r.code == 0);
    CHECK(r.out == "no errors\n");
  }
  SUBCASE("one PER to LOC confusion") {
    const std::string pred = dir.write("pred.conll", "# id a\nAnn _ _ B-LOC\nLee _ _ I-LOC\nran _ _ O\n\n");
    const auto r = run({"inspect", "--gold", gold, "--pred", pred, "--format", "kv"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("confusion.PER.LOC=1\n") != std::string::npos);
    const auto text = run({"inspect", "--gold", gold, "--pred", pred});
    CHECK(text.out.find("PER -> LOC: 1") != std::string::npos);
  }
  SUBCASE("misaligned files") {
    const std::string other = dir.write("other.conll", "# id b\nAnn _ _ O\nLee _ _ O\nran _ _ O\n\n");
    CHECK(run({"inspect", "--gold", gold, "--pred", other}).code == 2);
    const std::string shorter = dir.write("short.conll", "# id a\nAnn _ _ O\n\n");
    CHECK(run({"evaluate", "--gold", gold, "--pred", shorter}).code == 2);
    const std::string invalid = dir.write("invalid.conll", "# id a\nAnn _ _ I-PER\nLee _ _ I-PER\nran _ _ O\n\n");
    CHECK(run({"evaluate", "--gold", gold, "--pred", invalid, "--repair", "strict"}).code == 2);
    CHECK(run_binary("evaluate --gold " + gold + " --pred " + other) == 2);
  }
}
