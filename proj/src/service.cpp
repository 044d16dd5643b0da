#include "heat/service.hpp"

#include <charconv>
#include <cmath>

#include <httplib.h>

#include "heat/error.hpp"

namespace heat {

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return 400;
    case ErrorKind::not_found: return 404;
    case ErrorKind::conflict: return 409;
    case ErrorKind::data: return 422;
    case ErrorKind::internal: return 500;
  }
  return 500;
}

namespace {

using Request = httplib::Request;
using Response = httplib::Response;

void send_json(Response& res, const nlohmann::json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(Response& res, int status, const std::string& code, const std::string& message,
                const std::string& field = {}) {
  nlohmann::json body = {{"code", code}, {"message", message}};
  if (!field.empty()) body["field"] = field;
  send_json(res, body, status);
}

std::optional<std::string> param(const Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

std::optional<double> number_param(const Request& req, const char* name) {
  auto text = param(req, name);
  if (!text) return std::nullopt;
  double v = 0.0;
  auto [p, ec] = std::from_chars(text->data(), text->data() + text->size(), v);
  if (ec != std::errc{} || p != text->data() + text->size() || !std::isfinite(v)) {
    fail(ErrorKind::validation, std::string(name) + " must be a number", name);
  }
  return v;
}

std::optional<long long> integer_param(const Request& req, const char* name, long long lo, long long hi) {
  auto text = param(req, name);
  if (!text) return std::nullopt;
  long long v = 0;
  auto [p, ec] = std::from_chars(text->data(), text->data() + text->size(), v);
  if (ec != std::errc{} || p != text->data() + text->size() || v < lo || v > hi) {
    fail(ErrorKind::validation,
         std::string(name) + " must be an integer in " + std::to_string(lo) + ".." + std::to_string(hi), name);
  }
  return v;
}

std::optional<double> lookback_param(const Request& req) {
  auto text = param(req, "lookback");
  if (!text) return std::nullopt;
  return parse_lookback(*text);
}

nlohmann::json parse_body(const Request& req) {
  auto j = nlohmann::json::parse(req.body, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::validation, "request body is not valid JSON", "body");
  return j;
}

HacQuery hac_query(const Request& req) {
  HacQuery q;
  q.ioc = req.path_params.at("ioc");
  q.model = param(req, "model").value_or("");
  q.threshold = number_param(req, "threshold");
  q.lookback = lookback_param(req);
  if (auto m = param(req, "method")) q.method = parse_hac_method(*m);
  return q;
}

}  // namespace

Service::Service(Workspace& workspace) : ws_(workspace), server_(std::make_unique<httplib::Server>()) { routes(); }

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool Service::serve() { return server_->listen_after_bind(); }

void Service::stop() {
  if (server_) server_->stop();
}

void Service::routes() {
  auto& s = *server_;

  s.set_pre_routing_handler([this](const Request& req, Response& res) {
    const auto& token = ws_.config().auth_token;
    if (!token || req.path == "/health") return httplib::Server::HandlerResponse::Unhandled;
    if (req.get_header_value("Authorization") != "Bearer " + *token) {
      send_error(res, 401, "unauthorized", "missing or wrong bearer token");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  s.set_exception_handler([](const Request&, Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_error(res, http_status(e.kind()), to_string(e.kind()), e.what(), e.field());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, "validation", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  });

  s.set_error_handler([](const Request&, Response& res) {
    if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "not_found" : "error", "no such route");
  });

  s.Get("/health", [](const Request&, Response& res) { send_json(res, {{"status", "ok"}}); });

  s.Post("/corpus", [this](const Request& req, Response& res) {
    IngestOptions options;
    if (auto m = param(req, "mode")) options.mode = parse_key_mode(*m);
    send_json(res, ws_.ingest_text(req.body, options).to_json());
  });

  s.Get("/corpus", [this](const Request&, Response& res) {
    auto info = ws_.corpus_info();
    if (!info) fail(ErrorKind::not_found, "no corpus ingested yet", "corpus");
    send_json(res, info->to_json());
  });

  s.Get("/episodes", [this](const Request& req, Response& res) {
    EpisodeQuery q;
    q.key = param(req, "key");
    q.stage = param(req, "stage");
    q.from = number_param(req, "from");
    q.to = number_param(req, "to");
    if (auto v = integer_param(req, "offset", 0, 1LL << 40)) q.offset = static_cast<std::size_t>(*v);
    if (auto v = integer_param(req, "limit", 1, 10000)) q.limit = static_cast<std::size_t>(*v);
    send_json(res, episodes_view(ws_, q));
  });

  s.Get("/iocs", [this](const Request& req, Response& res) {
    const int severity = static_cast<int>(integer_param(req, "max_severity", 1, 255).value_or(1));
    send_json(res, iocs_view(ws_, param(req, "signature").value_or(""), severity));
  });

  s.Get("/hac/:ioc", [this](const Request& req, Response& res) { send_json(res, hac_view(ws_, hac_query(req))); });

  s.Get("/gain/:ioc", [this](const Request& req, Response& res) { send_json(res, gain_view(ws_, hac_query(req))); });

  s.Get("/rank", [this](const Request& req, Response& res) {
    RankQuery q;
    q.model = param(req, "model").value_or("");
    q.acg_min = number_param(req, "acg_min");
    q.threshold = number_param(req, "threshold");
    q.lookback = lookback_param(req);
    q.signature = param(req, "signature").value_or("");
    q.max_severity = static_cast<int>(integer_param(req, "max_severity", 1, 255).value_or(1));
    send_json(res, rank_view(ws_, q));
  });

  s.Get("/labels", [this](const Request&, Response& res) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& l : ws_.labels()) list.push_back(to_json(l));
    send_json(res, {{"labels", std::move(list)}});
  });

  // Batch post: every record is validated before any is stored.
  s.Post("/labels", [this](const Request& req, Response& res) {
    auto body = parse_body(req);
    const nlohmann::json* items = &body;
    if (body.is_object() && body.contains("labels")) items = &body["labels"];
    if (!items->is_array()) fail(ErrorKind::validation, "expected a list of labels", "labels");
    std::vector<LabeledPair> labels;
    nlohmann::json errors = nlohmann::json::array();
    for (std::size_t i = 0; i < items->size(); ++i) {
      try {
        labels.push_back(label_from_json((*items)[i]));
      } catch (const Error& e) {
        errors.push_back({{"index", i}, {"field", e.field()}, {"message", e.what()}});
      }
    }
    if (!errors.empty()) {
      const auto& first = errors.front();
      send_json(res,
                {{"code", "validation"},
                 {"message", "labels[" + std::to_string(first["index"].get<std::size_t>()) +
                                 "]: " + first["message"].get<std::string>()},
                 {"field", first["field"]},
                 {"errors", std::move(errors)}},
                400);
      return;
    }
    send_json(res, {{"stored", ws_.add_labels(labels)}});
  });

  s.Post("/train", [this](const Request& req, Response& res) {
    std::optional<Hyperparams> hyper;
    if (!req.body.empty()) {
      auto body = parse_body(req);
      if (body.contains("hyperparams")) hyper = Hyperparams::from_json(body["hyperparams"]);
    }
    send_json(res, ws_.train(hyper).to_json());
  });

  s.Post("/finetune", [this](const Request& req, Response& res) {
    std::optional<int> base;
    if (auto b = param(req, "base")) base = ws_.resolve_model_version(*b);
    send_json(res, ws_.fine_tune(base).to_json());
  });

  s.Get("/models", [this](const Request&, Response& res) { send_json(res, models_view(ws_)); });

  s.Post("/models/:version/activate", [this](const Request& req, Response& res) {
    ws_.activate_model(ws_.resolve_model_version(req.path_params.at("version")));
    send_json(res, models_view(ws_));
  });
}

}  // namespace heat
