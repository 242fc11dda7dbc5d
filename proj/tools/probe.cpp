// scratch probe for pretraining behavior on the synthetic corpus
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "evinf/training.hpp"

using namespace evinf;

int main(int argc, char** argv) {
  int emb = argc > 1 ? std::atoi(argv[1]) : 32;
  int attn_hidden = argc > 2 ? std::atoi(argv[2]) : 64;
  uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 1;
  int epochs = argc > 4 ? std::atoi(argv[4]) : 50;
  int fillers = argc > 5 ? std::atoi(argv[5]) : 8;
  double lr = argc > 6 ? std::atof(argv[6]) : 1e-3;
  double init_scale = argc > 7 ? std::atof(argv[7]) : 12.0;

  corpus::SynthConfig scfg;
  scfg.articles = 200;
  scfg.prompts_per_article = 4;
  scfg.filler_sentences = fillers;
  scfg.seed = 1234;
  const auto ds = corpus::generate_synthetic(scfg);

  std::vector<std::vector<std::string>> streams;
  for (const auto* p : ds.prompts_in(corpus::Split::Train)) {
    const auto* doc = ds.find_article(p->article_id);
    std::vector<std::string> toks;
    for (const auto& t : doc->tokens) toks.push_back(t.surface);
    streams.push_back(std::move(toks));
  }
  const auto vocab = prep::Vocabulary::build(streams, 20000);
  std::printf("vocab %d\n", vocab.size());

  model::ModelConfig mcfg;
  mcfg.variant = model::Variant::CondAttn;
  mcfg.emb_dim = emb;
  mcfg.hidden = 32;
  mcfg.attn_hidden = attn_hidden;
  mcfg.attn_init_scale = init_scale;
  mcfg.cls_hidden = 32;
  mcfg.max_tokens = 4096;
  mcfg.seed = seed;

  train::TrainConfig tcfg;
  tcfg.max_epochs = epochs;
  tcfg.patience = 10;
  tcfg.seed = seed;
  tcfg.adam.lr = lr;

  const auto data = train::encode_dataset(ds, vocab, mcfg, tcfg);
  std::printf("train %zu dev %zu\n", data.train.size(), data.nested_dev.size());

  model::InferenceModel m(mcfg, vocab.size());
  const auto t0 = std::chrono::steady_clock::now();
  const auto summary = train::pretrain_attention(m, data, tcfg);
  const auto t1 = std::chrono::steady_clock::now();
  std::printf("pretrain: init auc %.4f mass %.4f -> best auc %.4f mass %.4f (epoch %d, %zu run) in %.1fs\n",
              summary.init_token_auc, summary.init_evidence_mass, summary.best_token_auc,
              summary.best_evidence_mass, summary.run.best_epoch, summary.run.epochs.size(),
              std::chrono::duration<double>(t1 - t0).count());
  for (const auto& log : summary.run.epochs)
    std::printf("  epoch %2d loss %.5f criterion %.4f auc %.4f%s\n", log.epoch, log.train_loss,
                log.dev_value, log.dev_token_auc.value_or(-1.0), log.is_best ? " *" : "");

  // conditionality: argmax attention token inside the right planted sentence
  long articles_total = 0, articles_ok = 0, prompts_total = 0, prompts_ok = 0;
  for (const auto& [aid, doc] : ds.articles) {
    bool all_ok = true;
    int prompts_here = 0;
    for (const auto& p : ds.prompts) {
      if (p.article_id != aid) continue;
      ++prompts_here;
      const auto gold = ds.gold_evidence(p.prompt_id);
      std::vector<int> ids;
      for (const auto& t : doc.tokens) ids.push_back(vocab.id(t.surface));
      const auto cache = m.forward(ids, eval::text_token_ids(p.intervention, vocab),
                                   eval::text_token_ids(p.comparator, vocab),
                                   eval::text_token_ids(p.outcome, vocab));
      size_t argmax = 0;
      for (size_t t = 1; t < cache.attn.normalized.size(); ++t)
        if (cache.attn.normalized[t] > cache.attn.normalized[argmax]) argmax = t;
      const bool ok = argmax < gold->token_mask.size() && gold->token_mask[argmax];
      ++prompts_total;
      if (ok) ++prompts_ok;
      all_ok = all_ok && ok;
    }
    if (prompts_here >= 2) {
      ++articles_total;
      if (all_ok) ++articles_ok;
    }
  }
  std::printf("conditionality: prompts %ld/%ld = %.3f ; articles (all prompts right) %ld/%ld = %.3f\n",
              prompts_ok, prompts_total, double(prompts_ok) / prompts_total, articles_ok,
              articles_total, double(articles_ok) / articles_total);
  return 0;
}
