#include "smith/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "smith/attention_budget.hpp"
#include "smith/checkpoint.hpp"
#include "smith/corpus_io.hpp"
#include "smith/fixture.hpp"
#include "smith/matcher.hpp"
#include "smith/pretrain.hpp"
#include "smith/segmenter.hpp"
#include "smith/vocab.hpp"

namespace smith {

namespace {

using nlohmann::json;

struct TrainFlags {
  std::string corpus;
  std::string pairs;
  std::string vocab_path;
  std::string config_path;
  std::string init_checkpoint;
  std::string checkpoint_out;
  int steps = 100;
  int batch_size = 32;
  int warmup_steps = 0;
  int log_every = 10;
  double lr = 5e-5;
  std::uint64_t seed = 1;
};

// Deterministic epoch-shuffled batching over dataset indices.
class BatchCursor {
 public:
  BatchCursor(size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), size_t{0});
    reshuffle();
  }

  std::vector<size_t> next(size_t batch_size) {
    std::vector<size_t> batch;
    batch.reserve(batch_size);
    while (batch.size() < batch_size) {
      if (at_ == order_.size()) {
        reshuffle();
        at_ = 0;
      }
      batch.push_back(order_[at_++]);
    }
    return batch;
  }

 private:
  void reshuffle() { std::shuffle(order_.begin(), order_.end(), rng_); }

  std::vector<size_t> order_;
  std::mt19937_64 rng_;
  size_t at_ = 0;
};

// Resolves model config + vocabulary from either an initial checkpoint or
// the --vocab/--config pair, loading parameters when a checkpoint is given.
struct ModelSetup {
  ModelConfig config;
  Vocabulary vocab;
};

ModelSetup setup_model(ParameterStore& store, const TrainFlags& flags) {
  ModelSetup setup;
  if (!flags.init_checkpoint.empty()) {
    Checkpoint ckpt = load_checkpoint(flags.init_checkpoint, store);
    setup.config = ckpt.config;
    setup.vocab = ckpt.vocab;
    return setup;
  }
  if (flags.vocab_path.empty() || flags.config_path.empty())
    throw std::runtime_error("either --init-checkpoint or both --vocab and --config are required");
  setup.vocab = Vocabulary::load(flags.vocab_path);
  setup.config = load_model_config(flags.config_path);
  if (setup.config.vocab_size == 0) {
    setup.config.vocab_size = setup.vocab.size();
  } else if (setup.config.vocab_size != setup.vocab.size()) {
    throw std::runtime_error("config vocab_size " + std::to_string(setup.config.vocab_size) +
                             " does not match vocabulary of " +
                             std::to_string(setup.vocab.size()));
  }
  setup.config.validate();
  init_parameters(store, setup.config, flags.seed);
  return setup;
}

int cmd_build_vocab(const std::string& corpus, const std::string& out, int max_size,
                    int min_count) {
  VocabBuilder builder;
  size_t docs = 0;
  for_each_document(corpus, [&](const RawDocument& doc) {
    builder.add_text(doc.text);
    ++docs;
  });
  Vocabulary vocab = builder.finish(max_size, min_count);
  vocab.save(out);
  std::cout << json{{"documents", docs}, {"tokens", vocab.size()}}.dump() << '\n';
  return 0;
}

int cmd_segment(const std::string& docs_path, const std::string& vocab_path, int block_len,
                int max_blocks, const std::string& out_path) {
  Vocabulary vocab = Vocabulary::load(vocab_path);
  std::ostringstream out;
  for_each_document(docs_path, [&](const RawDocument& doc) {
    SegmentedDocument seg = segment_document(doc, vocab, block_len, max_blocks);
    json blocks = json::array();
    for (const auto& block : seg.blocks) blocks.push_back(block.token_ids);
    json line{{"doc_id", seg.doc_id},
              {"blocks", blocks},
              {"block_mask", std::vector<int>(seg.block_mask.begin(), seg.block_mask.end())}};
    out << line.dump() << '\n';
  });
  if (out_path.empty())
    std::cout << out.str();
  else
    atomic_write(out_path, out.str());
  return 0;
}

int cmd_pretrain(const TrainFlags& flags, const std::string& loss_mode) {
  ParameterStore store;
  ModelSetup setup = setup_model(store, flags);

  std::vector<SegmentedDocument> segmented;
  for_each_document(flags.corpus, [&](const RawDocument& doc) {
    segmented.push_back(
        segment_document(doc, setup.vocab, setup.config.block_len, setup.config.max_blocks));
  });
  if (segmented.empty()) throw std::runtime_error("pretraining corpus is empty");

  PretrainStepConfig step_config;
  step_config.objective =
      loss_mode == "wp" ? PretrainObjective::kWordOnly : PretrainObjective::kWordAndBlock;

  AdamConfig adam_config;
  adam_config.lr = flags.lr;
  adam_config.warmup_steps = flags.warmup_steps;
  AdamState adam;

  std::mt19937_64 rng(flags.seed ^ 0x9e3779b97f4a7c15ULL);
  BatchCursor cursor(segmented.size(), flags.seed ^ 0xc2b2ae3d27d4eb4fULL);

  for (int step = 1; step <= flags.steps; ++step) {
    std::vector<SegmentedDocument> batch;
    for (size_t idx : cursor.next(static_cast<size_t>(flags.batch_size)))
      batch.push_back(segmented[idx]);
    PretrainLoss loss = pretrain_step(store, adam, adam_config, setup.config, step_config,
                                      batch, rng);
    if (flags.log_every > 0 && (step % flags.log_every == 0 || step == 1)) {
      std::cout << json{{"step", step},
                        {"loss_wp", loss.word_loss},
                        {"loss_sp", loss.block_loss},
                        {"loss_total", loss.total},
                        {"block_top1", loss.block_top1_accuracy}}
                       .dump()
                << '\n';
    }
  }
  if (!flags.checkpoint_out.empty())
    save_checkpoint(flags.checkpoint_out, setup.config, setup.vocab, store);
  return 0;
}

std::vector<MatchExample> segment_pairs(const std::vector<PairRecord>& pairs,
                                        const Vocabulary& vocab, const ModelConfig& config) {
  std::vector<MatchExample> examples;
  examples.reserve(pairs.size());
  for (const auto& pair : pairs) {
    MatchExample ex;
    ex.source = segment_document(pair.source, vocab, config.block_len, config.max_blocks);
    ex.target = segment_document(pair.target, vocab, config.block_len, config.max_blocks);
    ex.label = pair.label;
    examples.push_back(std::move(ex));
  }
  return examples;
}

int cmd_finetune(const TrainFlags& flags) {
  ParameterStore store;
  ModelSetup setup = setup_model(store, flags);
  std::vector<MatchExample> examples =
      segment_pairs(read_pairs(flags.pairs), setup.vocab, setup.config);
  if (examples.empty()) throw std::runtime_error("pair dataset is empty");

  AdamConfig adam_config;
  adam_config.lr = flags.lr;
  adam_config.warmup_steps = flags.warmup_steps;
  AdamState adam;

  std::mt19937_64 rng(flags.seed ^ 0x9e3779b97f4a7c15ULL);
  BatchCursor cursor(examples.size(), flags.seed ^ 0xc2b2ae3d27d4eb4fULL);

  for (int step = 1; step <= flags.steps; ++step) {
    std::vector<MatchExample> batch;
    for (size_t idx : cursor.next(static_cast<size_t>(flags.batch_size)))
      batch.push_back(examples[idx]);
    FinetuneResult result = finetune_step(store, adam, adam_config, setup.config, batch, rng);
    if (flags.log_every > 0 && (step % flags.log_every == 0 || step == 1)) {
      std::cout << json{{"step", step},
                        {"loss", result.loss},
                        {"batch_accuracy", result.accuracy}}
                       .dump()
                << '\n';
    }
  }
  if (!flags.checkpoint_out.empty())
    save_checkpoint(flags.checkpoint_out, setup.config, setup.vocab, store);
  return 0;
}

int cmd_embed(const std::string& docs_path, const std::string& checkpoint_path,
              const std::string& out_path) {
  ParameterStore store;
  Checkpoint ckpt = load_checkpoint(checkpoint_path, store);
  std::vector<SegmentedDocument> docs;
  for_each_document(docs_path, [&](const RawDocument& doc) {
    docs.push_back(segment_document(doc, ckpt.vocab, ckpt.config.block_len,
                                    ckpt.config.max_blocks));
  });
  std::ostringstream out;
  for (const auto& emb : infer_embeddings(store, ckpt.config, docs)) {
    std::vector<double> values(emb.vector.data(), emb.vector.data() + emb.vector.size());
    out << json{{"id", emb.doc_id}, {"vector", values}}.dump() << '\n';
  }
  atomic_write(out_path, out.str());
  return 0;
}

int cmd_eval(const std::string& pairs_path, const std::string& checkpoint_path,
             double threshold) {
  ParameterStore store;
  Checkpoint ckpt = load_checkpoint(checkpoint_path, store);
  std::vector<MatchExample> examples =
      segment_pairs(read_pairs(pairs_path), ckpt.vocab, ckpt.config);
  if (examples.empty()) throw std::runtime_error("pair dataset is empty");
  std::vector<double> probabilities;
  std::vector<int> labels;
  for (const auto& ex : examples) {
    probabilities.push_back(match_probability(store, ckpt.config, ex));
    labels.push_back(ex.label);
  }
  EvalMetrics metrics = evaluate(probabilities, labels, threshold);
  std::cout << json{{"accuracy", metrics.accuracy},
                    {"precision", metrics.precision},
                    {"recall", metrics.recall},
                    {"f1", metrics.f1},
                    {"threshold", metrics.threshold},
                    {"pairs", examples.size()}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_profile_attention(int tokens, int block_len, int batch, int heads, int layers,
                          bool verify) {
  AttentionBudget budget = count_attention_entries(tokens, block_len, batch, heads, layers);
  json out{{"tokens", budget.tokens},
           {"padded_tokens", budget.padded_tokens},
           {"block_len", budget.block_len},
           {"batch", budget.batch},
           {"heads", budget.heads},
           {"layers", budget.layers},
           {"flat_entries", budget.flat_entries},
           {"sentence_level_entries", budget.sentence_level_entries},
           {"document_level_entries", budget.document_level_entries},
           {"hierarchical_total", budget.hierarchical_total},
           {"flat_bytes", budget.flat_bytes},
           {"hierarchical_bytes", budget.hierarchical_bytes},
           {"reduction_factor", budget.reduction_factor}};
  if (verify) {
    // Instrumented cross-check at a bounded geometry so big requests stay
    // cheap: cap the token count and batch, keep block/head/layer structure.
    const int cap_tokens = std::min(budget.padded_tokens, std::max(block_len, 256));
    const int cap_batch = std::min(batch, 2);
    AttentionBudget probe =
        count_attention_entries(cap_tokens, block_len, cap_batch, heads, layers);
    const bool ok = verify_attention_budget(probe);
    out["verified"] = json{{"tokens", probe.padded_tokens},
                           {"batch", probe.batch},
                           {"instrumented_matches_closed_form", ok}};
    if (!ok) {
      std::cout << out.dump() << '\n';
      throw std::runtime_error("instrumented attention counts disagree with the closed form");
    }
  }
  std::cout << out.dump() << '\n';
  return 0;
}

int cmd_generate_fixture(const FixtureOptions& options, const std::string& pairs_out,
                         const std::string& docs_out) {
  FixtureData data = generate_fixture(options);
  write_pairs(pairs_out, data.pairs);
  if (!docs_out.empty()) write_corpus(docs_out, data.docs);
  std::cout << json{{"pairs", data.pairs.size()}, {"documents", data.docs.size()}}.dump()
            << '\n';
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"Siamese hierarchical transformer encoder for long document matching"};
  app.require_subcommand(1);

  // build-vocab
  std::string bv_corpus, bv_out;
  int bv_max_size = 30000, bv_min_count = 1;
  auto* build_vocab = app.add_subcommand("build-vocab", "Build a frequency vocabulary");
  build_vocab->add_option("--corpus", bv_corpus, "Corpus JSONL file")->required();
  build_vocab->add_option("--out", bv_out, "Output vocabulary path")->required();
  build_vocab->add_option("--max-size", bv_max_size, "Vocabulary cap including specials");
  build_vocab->add_option("--min-count", bv_min_count, "Minimum token frequency");

  // segment
  std::string sg_docs, sg_vocab, sg_out;
  int sg_ls = 32, sg_ld = 48;
  auto* segment = app.add_subcommand("segment", "Greedy sentence filling debug output");
  segment->add_option("--docs", sg_docs, "Corpus JSONL file")->required();
  segment->add_option("--vocab", sg_vocab, "Vocabulary file")->required();
  segment->add_option("--ls", sg_ls, "Sentence block length");
  segment->add_option("--ld", sg_ld, "Max sentence blocks");
  segment->add_option("--out", sg_out, "Output path (stdout when omitted)");

  // pretrain
  TrainFlags pt;
  std::string pt_loss = "wp+sp";
  auto* pretrain = app.add_subcommand("pretrain", "Masked word + masked block pretraining");
  pretrain->add_option("--corpus", pt.corpus, "Corpus JSONL file")->required();
  pretrain->add_option("--vocab", pt.vocab_path, "Vocabulary file");
  pretrain->add_option("--config", pt.config_path, "Model config file");
  pretrain->add_option("--init-checkpoint", pt.init_checkpoint, "Checkpoint to resume from");
  pretrain->add_option("--steps", pt.steps, "Optimizer steps")->required();
  pretrain->add_option("--batch-size", pt.batch_size, "Documents per step");
  pretrain->add_option("--warmup-steps", pt.warmup_steps, "Linear warmup steps");
  pretrain->add_option("--loss", pt_loss, "Objective")
      ->check(CLI::IsMember({"wp", "wp+sp"}));
  pretrain->add_option("--seed", pt.seed, "Random seed");
  pretrain->add_option("--lr", pt.lr, "Learning rate");
  pretrain->add_option("--checkpoint-out", pt.checkpoint_out, "Checkpoint output path");
  pretrain->add_option("--log-every", pt.log_every, "Log interval in steps");

  // finetune
  TrainFlags ft;
  auto* finetune = app.add_subcommand("finetune", "Siamese matching fine-tuning");
  finetune->add_option("--pairs", ft.pairs, "Pair JSONL file")->required();
  finetune->add_option("--vocab", ft.vocab_path, "Vocabulary file");
  finetune->add_option("--config", ft.config_path, "Model config file");
  finetune->add_option("--init-checkpoint", ft.init_checkpoint, "Pretrained checkpoint");
  finetune->add_option("--steps", ft.steps, "Optimizer steps")->required();
  finetune->add_option("--batch-size", ft.batch_size, "Pairs per step");
  finetune->add_option("--warmup-steps", ft.warmup_steps, "Linear warmup steps");
  finetune->add_option("--seed", ft.seed, "Random seed");
  finetune->add_option("--lr", ft.lr, "Learning rate");
  finetune->add_option("--checkpoint-out", ft.checkpoint_out, "Checkpoint output path");
  finetune->add_option("--log-every", ft.log_every, "Log interval in steps");

  // embed
  std::string em_docs, em_checkpoint, em_out;
  auto* embed = app.add_subcommand("embed", "Offline document embedding inference");
  embed->add_option("--docs", em_docs, "Corpus JSONL file")->required();
  embed->add_option("--checkpoint", em_checkpoint, "Trained checkpoint")->required();
  embed->add_option("--out", em_out, "Embedding JSONL output")->required();

  // eval
  std::string ev_pairs, ev_checkpoint;
  double ev_threshold = 0.5;
  auto* eval = app.add_subcommand("eval", "Classification metrics on a pair dataset");
  eval->add_option("--pairs", ev_pairs, "Pair JSONL file")->required();
  eval->add_option("--checkpoint", ev_checkpoint, "Trained checkpoint")->required();
  eval->add_option("--threshold", ev_threshold, "Probability decision threshold");

  // profile-attention
  int pa_n = 1536, pa_ls = 32, pa_b = 32, pa_a = 4, pa_l = 3;
  bool pa_verify = true;
  auto* profile = app.add_subcommand("profile-attention",
                                     "Attention score-matrix budget: flat vs hierarchical");
  profile->add_option("--n", pa_n, "Total tokens per document");
  profile->add_option("--ls", pa_ls, "Sentence block length");
  profile->add_option("--b", pa_b, "Batch size");
  profile->add_option("--a", pa_a, "Attention heads");
  profile->add_option("--l", pa_l, "Layers per level");
  profile->add_flag("--verify,!--no-verify", pa_verify,
                    "Cross-check closed forms against an instrumented forward pass");

  // generate-fixture
  FixtureOptions fx;
  std::string fx_out, fx_docs_out;
  auto* fixture = app.add_subcommand("generate-fixture", "Synthetic topic-matching dataset");
  fixture->add_option("--out", fx_out, "Pair JSONL output")->required();
  fixture->add_option("--docs-out", fx_docs_out, "Also write the documents as corpus JSONL");
  fixture->add_option("--n-pairs", fx.n_pairs, "Number of pairs");
  fixture->add_option("--topics", fx.topics, "Number of topics");
  fixture->add_option("--doc-len", fx.doc_len, "Tokens per document");
  fixture->add_option("--filler-tokens", fx.filler_tokens,
                      "Topic-neutral prefix length per document");
  fixture->add_option("--words-per-topic", fx.words_per_topic, "Topic vocabulary size");
  fixture->add_option("--seed", fx.seed, "Random seed");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (build_vocab->parsed()) return cmd_build_vocab(bv_corpus, bv_out, bv_max_size, bv_min_count);
    if (segment->parsed()) return cmd_segment(sg_docs, sg_vocab, sg_ls, sg_ld, sg_out);
    if (pretrain->parsed()) return cmd_pretrain(pt, pt_loss);
    if (finetune->parsed()) return cmd_finetune(ft);
    if (embed->parsed()) return cmd_embed(em_docs, em_checkpoint, em_out);
    if (eval->parsed()) return cmd_eval(ev_pairs, ev_checkpoint, ev_threshold);
    if (profile->parsed()) return cmd_profile_attention(pa_n, pa_ls, pa_b, pa_a, pa_l, pa_verify);
    if (fixture->parsed()) return cmd_generate_fixture(fx, fx_out, fx_docs_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace smith
