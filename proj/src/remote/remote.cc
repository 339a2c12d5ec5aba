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

#include "ccshap/remote.h"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <semaphore>
#include <thread>

#include "ccshap/error.h"
#include "ccshap/hashing.h"
#include "httplib.h"
#include "json.hpp"

namespace ccshap::remote {
namespace {

using nlohmann::json;

constexpr size_t kExcerptBytes = 200;
constexpr std::ptrdiff_t kMaxInFlight = 1024;

std::string Excerpt(const std::string& body) {
  if (body.size() <= kExcerptBytes) return body;
  return body.substr(0, kExcerptBytes) + "...";
}

json ParseBody(const std::string& path, const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::exception&) {
    throw Error(ErrorKind::kProtocol, path + " returned malformed JSON: " + Excerpt(body));
  }
}

double ReadLogprob(const json& value, const std::string& path, const std::string& what) {
  if (!value.is_number()) {
    throw Error(ErrorKind::kProtocol, path + " returned a non-numeric " + what + ": " +
                                          Excerpt(value.dump()));
  }
  return value.get<double>();
}

}  // namespace

void RemoteEndpoint::Validate() const {
  if (base_url.rfind("http://", 0) != 0 || base_url.size() <= 7) {
    throw Error(ErrorKind::kConfig,
                "remote base_url must start with http:// (got \"" + base_url + "\")");
  }
  if (!(timeout_seconds > 0.0)) {
    throw Error(ErrorKind::kConfig, "remote timeout must be positive");
  }
  if (max_retries < 0) throw Error(ErrorKind::kConfig, "remote max_retries must be >= 0");
  if (max_in_flight < 1 || max_in_flight > kMaxInFlight) {
    throw Error(ErrorKind::kConfig, "remote max_in_flight must be in [1, 1024]");
  }
  if (backoff_base.count() < 0 || backoff_factor < 1.0) {
    throw Error(ErrorKind::kConfig, "remote backoff must be non-negative with factor >= 1");
  }
}

// Keep-alive clients, at most max_in_flight of them in use at once.
class RemoteClient::Pool {
 public:
  Pool(const RemoteEndpoint& endpoint, std::string host)
      : endpoint_(endpoint), host_(std::move(host)), slots_(endpoint.max_in_flight) {}

  template <typename Fn>
  auto With(Fn&& fn) {
    slots_.acquire();
    std::unique_ptr<httplib::Client> client = Take();
    struct Return {
      Pool* pool;
      std::unique_ptr<httplib::Client>* client;
      ~Return() {
        pool->Give(std::move(*client));
        pool->slots_.release();
      }
    } guard{this, &client};
    return fn(*client);
  }

 private:
  std::unique_ptr<httplib::Client> Take() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (!idle_.empty()) {
        auto client = std::move(idle_.back());
        idle_.pop_back();
        return client;
      }
    }
    auto client = std::make_unique<httplib::Client>(host_);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(endpoint_.timeout_seconds));
    const time_t sec = static_cast<time_t>(timeout.count() / 1000000);
    const time_t usec = static_cast<time_t>(timeout.count() % 1000000);
    client->set_connection_timeout(sec, usec);
    client->set_read_timeout(sec, usec);
    client->set_write_timeout(sec, usec);
    client->set_keep_alive(true);
    if (endpoint_.auth_token) client->set_bearer_token_auth(*endpoint_.auth_token);
    return client;
  }

  void Give(std::unique_ptr<httplib::Client> client) {
    std::lock_guard<std::mutex> lock(mu_);
    idle_.push_back(std::move(client));
  }

  const RemoteEndpoint endpoint_;
  const std::string host_;
  std::counting_semaphore<kMaxInFlight> slots_;
  std::mutex mu_;
  std::vector<std::unique_ptr<httplib::Client>> idle_;
};

RemoteClient::RemoteClient(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  endpoint_.Validate();
  const size_t slash = endpoint_.base_url.find('/', 7);
  host_ = endpoint_.base_url.substr(0, slash);
  if (slash != std::string::npos) path_prefix_ = endpoint_.base_url.substr(slash);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  pool_ = std::make_unique<Pool>(endpoint_, host_);
}

RemoteClient::~RemoteClient() = default;

std::string RemoteClient::Post(const std::string& path, const std::string& body) const {
  const std::string url_path = path_prefix_ + path;
  std::string last_failure;
  for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double delay = static_cast<double>(endpoint_.backoff_base.count()) *
                           std::pow(endpoint_.backoff_factor, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay));
    }
    auto outcome = pool_->With([&](httplib::Client& client) {
      httplib::Result result = client.Post(url_path, body, "application/json");
      if (!result) {
        return std::make_pair(-1, httplib::to_string(result.error()));
      }
      return std::make_pair(result->status, result->body);
    });
    const int status = outcome.first;
    if (status == -1) {
      last_failure = outcome.second;
      continue;
    }
    if (status >= 500) {
      last_failure = "HTTP " + std::to_string(status) + ": " + Excerpt(outcome.second);
      continue;
    }
    if (status != 200) {
      throw Error(ErrorKind::kProtocol, "POST " + host_ + url_path + " returned HTTP " +
                                            std::to_string(status) + ": " +
                                            Excerpt(outcome.second));
    }
    return outcome.second;
  }
  throw Error(ErrorKind::kTransport,
              "POST " + host_ + url_path + " failed after " +
                  std::to_string(endpoint_.max_retries + 1) + " attempts: " + last_failure);
}

std::map<std::string, double> RemoteClient::Classify(
    const std::string& masked_text, const std::vector<std::string>& labels) const {
  if (labels.empty()) throw Error(ErrorKind::kContract, "classify needs at least one label");
  const json request = {{"model", endpoint_.model_name}, {"prompt", masked_text}, {"labels", labels}};
  const std::string path = "/v1/score";
  const json response = ParseBody(path, Post(path, request.dump()));
  if (!response.is_object() || !response.contains("label_logprobs") ||
      !response["label_logprobs"].is_object()) {
    throw Error(ErrorKind::kProtocol,
                path + " response has no label_logprobs object: " + Excerpt(response.dump()));
  }
  const json& table = response["label_logprobs"];
  std::vector<double> logprobs;
  for (const auto& label : labels) {
    if (!table.contains(label)) {
      throw Error(ErrorKind::kProtocol, path + " response is missing label \"" + label +
                                            "\": " + Excerpt(response.dump()));
    }
    logprobs.push_back(ReadLogprob(table[label], path, "logprob for " + label));
  }
  const double top = *std::max_element(logprobs.begin(), logprobs.end());
  double total = 0.0;
  for (double& lp : logprobs) {
    lp = std::isfinite(top) ? std::exp(lp - top) : 1.0;
    total += lp;
  }
  std::map<std::string, double> out;
  for (size_t i = 0; i < labels.size(); ++i) {
    out[labels[i]] = scoring::Clamp(logprobs[i] / total);
  }
  return out;
}

std::string RemoteClient::ExplanationRequest(const std::string& text, Label label) const {
  std::string instruction = endpoint_.explanation_prompt;
  const std::string placeholder = "{label}";
  for (size_t at = instruction.find(placeholder); at != std::string::npos;
       at = instruction.find(placeholder, at)) {
    instruction.replace(at, placeholder.size(), LabelName(label));
    at += LabelName(label).size();
  }
  return text + "\n\n" + instruction;
}

std::string RemoteClient::Explain(const std::string& full_text, Label predicted) const {
  const json request = {{"model", endpoint_.model_name},
                        {"prompt", ExplanationRequest(full_text, predicted)},
                        {"temperature", 0}};
  const std::string path = "/v1/generate";
  const json response = ParseBody(path, Post(path, request.dump()));
  if (!response.is_object() || !response.contains("text") || !response["text"].is_string()) {
    throw Error(ErrorKind::kProtocol,
                path + " response has no text field: " + Excerpt(response.dump()));
  }
  return response["text"].get<std::string>();
}

std::vector<double> RemoteClient::TokenLogprobs(const std::string& prompt,
                                                const std::string& continuation) const {
  if (continuation.empty()) {
    throw Error(ErrorKind::kContract, "logprob needs a non-empty continuation");
  }
  const json request = {
      {"model", endpoint_.model_name}, {"prompt", prompt}, {"continuation", continuation}};
  const std::string path = "/v1/logprob";
  const json response = ParseBody(path, Post(path, request.dump()));
  if (!response.is_object() || !response.contains("token_logprobs") ||
      !response["token_logprobs"].is_array() || response["token_logprobs"].empty()) {
    throw Error(ErrorKind::kProtocol,
                path + " response has no token_logprobs array: " + Excerpt(response.dump()));
  }
  std::vector<double> out;
  for (const auto& lp : response["token_logprobs"]) {
    out.push_back(ReadLogprob(lp, path, "token logprob"));
  }
  return out;
}

double RemoteClient::SequenceProbability(const std::string& masked_text,
                                         const std::string& continuation) const {
  const std::vector<double> lps = TokenLogprobs(masked_text, continuation);
  double sum = 0.0;
  for (double lp : lps) sum += lp;
  return scoring::Clamp(std::exp(sum / static_cast<double>(lps.size())));
}

RemoteBackend::RemoteBackend(RemoteEndpoint endpoint) : client_(std::move(endpoint)) {
  const RemoteEndpoint& e = client_.endpoint();
  id_ = "remote:" + e.model_name + "@" + e.base_url + ":" +
        HexDigest(HashBytes(e.explanation_prompt));
}

double RemoteBackend::LabelProbability(const scoring::TokenSequence& masked,
                                       Label label) const {
  const std::vector<std::string> labels = {std::string(LabelName(Label::kPhishing)),
                                           std::string(LabelName(Label::kLegitimate))};
  return client_.Classify(scoring::Detokenize(masked), labels).at(std::string(LabelName(label)));
}

std::vector<double> RemoteBackend::ExplanationLogprobs(
    const scoring::TokenSequence& masked, const scoring::ExplanationTarget& target) const {
  return client_.TokenLogprobs(
      client_.ExplanationRequest(scoring::Detokenize(masked), target.label), target.text);
}

scoring::ExplanationTarget RemoteBackend::Explain(const scoring::TokenSequence& full,
                                                  std::span<const int> /*players*/,
                                                  Label predicted) const {
  scoring::ExplanationTarget target;
  target.label = predicted;
  target.text = client_.Explain(scoring::Detokenize(full), predicted);
  target.prompt = client_.endpoint().explanation_prompt;
  try {
    target.tokens = scoring::Tokenize(target.text, {.max_tokens = SIZE_MAX}).surface;
  } catch (const Error&) {
    target.tokens.clear();  // nothing scorable; the audit marks it degenerate
  }
  return target;
}

}  // namespace ccshap::remote
