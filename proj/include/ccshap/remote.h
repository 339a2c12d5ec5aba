/*
 * Copyright 2026 The ccshap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// HTTP/JSON client for external inference servers.
//
//   POST /v1/score     {model, prompt, labels[]}        -> {label_logprobs: {label: lp}}
//   POST /v1/generate  {model, prompt, temperature: 0}  -> {text}
//   POST /v1/logprob   {model, prompt, continuation}    -> {token_logprobs: [lp, ...]}
//
// Masked tokens travel as the literal "<mask>" inside the prompt text.

#ifndef CCSHAP_REMOTE_H_
#define CCSHAP_REMOTE_H_

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ccshap/label.h"
#include "ccshap/scoring.h"

namespace ccshap::remote {

inline constexpr std::string_view kDefaultExplanationPrompt = "Explain why this email is {label}.";

struct RemoteEndpoint {
  std::string base_url;  // http://host[:port][/prefix]
  std::string model_name;
  double timeout_seconds = 30.0;
  int max_retries = 2;
  int max_in_flight = 4;
  std::optional<std::string> auth_token;
  std::chrono::milliseconds backoff_base{250};
  double backoff_factor = 2.0;
  // {label} is replaced by the label name.
  std::string explanation_prompt = std::string(kDefaultExplanationPrompt);

  // Throws a config error on timeout <= 0, max_retries < 0,
  // max_in_flight < 1 or a base_url that is not http://.
  void Validate() const;

  bool operator==(const RemoteEndpoint&) const = default;
};

class RemoteClient {
 public:
  explicit RemoteClient(RemoteEndpoint endpoint);
  ~RemoteClient();

  RemoteClient(const RemoteClient&) = delete;
  RemoteClient& operator=(const RemoteClient&) = delete;

  const RemoteEndpoint& endpoint() const { return endpoint_; }

  // Probabilities over `labels`, renormalized to sum to 1.
  std::map<std::string, double> Classify(const std::string& masked_text,
                                         const std::vector<std::string>& labels) const;

  // Generated text, verbatim.
  std::string Explain(const std::string& full_text, Label predicted) const;

  // Per-token natural-log probabilities of `continuation` after `prompt`.
  std::vector<double> TokenLogprobs(const std::string& prompt,
                                    const std::string& continuation) const;

  // exp(mean(TokenLogprobs(masked_text, continuation))).
  double SequenceProbability(const std::string& masked_text,
                             const std::string& continuation) const;

  // Input text followed by the explanation instruction for `label`.
  std::string ExplanationRequest(const std::string& text, Label label) const;

 private:
  class Pool;

  std::string Post(const std::string& path, const std::string& body) const;

  RemoteEndpoint endpoint_;
  std::string host_;  // scheme://host:port
  std::string path_prefix_;
  std::unique_ptr<Pool> pool_;
};

// Backend over a remote model. Coalitions are sent as detokenized text with
// hidden tokens replaced by "<mask>".
class RemoteBackend : public scoring::Backend {
 public:
  explicit RemoteBackend(RemoteEndpoint endpoint);

  std::string id() const override { return id_; }
  double LabelProbability(const scoring::TokenSequence& masked, Label label) const override;
  std::vector<double> ExplanationLogprobs(
      const scoring::TokenSequence& masked,
      const scoring::ExplanationTarget& target) const override;
  scoring::ExplanationTarget Explain(const scoring::TokenSequence& full,
                                     std::span<const int> players,
                                     Label predicted) const override;

  const RemoteClient& client() const { return client_; }

 private:
  RemoteClient client_;
  std::string id_;
};

}  // namespace ccshap::remote

#endif  // CCSHAP_REMOTE_H_
