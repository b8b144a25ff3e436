#include "ctrace/service.hpp"

#include <httplib.h>
#include <json.hpp>

#include "ctrace/error.hpp"

namespace ctrace::service {

using nlohmann::json;

TracingBridge::TracingBridge(const opnet::Deployment &deployment, const opnet::TraceParams &params)
    : network_(deployment, params) {
  suspects_.threshold = params.threshold;
}

bool TracingBridge::forward(const PhoneNumber &number) {
  std::lock_guard lock(mutex_);
  try {
    network_.submit_positive(number);
  } catch (const Error &e) {
    if (e.kind() == ErrorKind::UnknownSubscriber || e.kind() == ErrorKind::DuplicateWorkflow)
      return false;
    throw;
  }
  suspects_ = network_.run_trace_round();
  return true;
}

std::optional<trace::SuspectEntry> TracingBridge::lookup(const PhoneNumber &number) const {
  std::lock_guard lock(mutex_);
  if (const auto *e = suspects_.find(number))
    return *e;
  return std::nullopt;
}

trace::SuspectList TracingBridge::suspects() const {
  std::lock_guard lock(mutex_);
  return suspects_;
}

namespace {

int http_status(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::NotFound: return 404;
  case ErrorKind::Conflict:
  case ErrorKind::DuplicateWorkflow: return 409;
  case ErrorKind::InvalidToken: return 401;
  case ErrorKind::Io: return 500;
  default: return 400;
  }
}

void reply(httplib::Response &res, int status, const json &body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response &res, int status, std::string_view code,
                 const std::string &message) {
  reply(res, status, json{{"code", code}, {"message", message}});
}

json parse_body(const httplib::Request &req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error &) {
    throw Error(ErrorKind::Validation, "request body is not valid JSON");
  }
}

std::string token_of(const httplib::Request &req) {
  if (req.has_header("X-Registration-Token"))
    return req.get_header_value("X-Registration-Token");
  const auto auth = req.get_header_value("Authorization");
  if (auth.starts_with("Bearer "))
    return auth.substr(7);
  throw Error(ErrorKind::InvalidToken, "missing registration token header");
}

json area_json(const registry::AreaCount &a) {
  return json{{"cell", a.cell.id()},
              {"south", a.cell.south()},
              {"west", a.cell.west()},
              {"north", a.cell.south() + registry::kCellDegrees},
              {"east", a.cell.west() + registry::kCellDegrees},
              {"positive_count", a.positive_count}};
}

triage::Answers parse_answers(const json &body) {
  if (!body.is_object() || !body.contains("answers"))
    throw Error(ErrorKind::Validation, "body needs an 'answers' field");
  const auto &a = body["answers"];
  std::vector<bool> values;
  if (a.is_array()) {
    for (const auto &v : a) {
      if (!v.is_boolean())
        throw Error(ErrorKind::Validation, "answers must be booleans");
      values.push_back(v.get<bool>());
    }
    return triage::make_answers(values);
  }
  if (!a.is_object())
    throw Error(ErrorKind::Validation, "answers must be an array or an object keyed by question id");
  if (a.size() != triage::kQuestionCount)
    throw Error(ErrorKind::Validation,
                "expected 9 answers, got " + std::to_string(a.size()));
  triage::Answers out{};
  for (const auto &[id, v] : a.items()) {
    if (!v.is_boolean())
      throw Error(ErrorKind::Validation, "answer '" + id + "' must be a boolean");
    out[triage::question_index(id)] = v.get<bool>();
  }
  return out;
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request &req, httplib::Response &res) {
    try {
      fn(req, res);
    } catch (const Error &e) {
      reply_error(res, http_status(e.kind()), error_code(e.kind()), e.what());
    } catch (const json::exception &e) {
      reply_error(res, 400, "validation_error", e.what());
    } catch (const std::exception &e) {
      reply_error(res, 500, "internal", e.what());
    }
  };
}

} // namespace

void mount_routes(httplib::Server &server, registry::Registry &reg) {
  server.Post("/v1/tests", guarded([&reg](const auto &req, auto &res) {
    const json body = parse_body(req);
    if (!body.is_object())
      throw Error(ErrorKind::Validation, "body must be an object");
    registry::NewTest t;
    t.request_id = body.value("request_id", "");
    t.address = body.value("address", "");
    if (!body.contains("numbers") || !body["numbers"].is_array())
      throw Error(ErrorKind::Validation, "'numbers' must be an array of phone numbers");
    for (const auto &n : body["numbers"]) {
      if (!n.is_string())
        throw Error(ErrorKind::Validation, "phone numbers must be strings");
      t.numbers.push_back(n.get<std::string>());
    }
    if (body.contains("lat") || body.contains("lon"))
      t.location = GeoCoordinate(body.at("lat").get<double>(), body.at("lon").get<double>());
    const auto out = reg.record_test(t);
    reply(res, out.created ? 201 : 200, json{{"record_id", out.record_id}});
  }));

  server.Get(R"(/v1/tests/([A-Za-z0-9]+))", guarded([&reg](const auto &req, auto &res) {
    const auto rec = reg.get_test(req.matches[1]);
    if (!rec)
      throw Error(ErrorKind::NotFound, "no test record " + std::string(req.matches[1]));
    reply(res, 200,
          json{{"record_id", rec->record_id},
               {"result", registry::to_string(rec->result)},
               {"area_cell", rec->area_cell ? json(rec->area_cell->id()) : json(nullptr)},
               {"recorded_at", rec->recorded_at},
               {"number_count", rec->numbers.size()}});
  }));

  server.Post(R"(/v1/tests/([A-Za-z0-9]+)/positive)", guarded([&reg](const auto &req, auto &res) {
    const auto out = reg.report_positive(req.matches[1]);
    reply(res, 200,
          json{{"record_id", out.record_id},
               {"result", "positive"},
               {"forwarded", out.forwarded},
               {"unrouted", out.unrouted}});
  }));

  server.Post(R"(/v1/tests/([A-Za-z0-9]+)/negative)", guarded([&reg](const auto &req, auto &res) {
    reg.report_negative(req.matches[1]);
    reply(res, 200, json{{"record_id", std::string(req.matches[1])}, {"result", "negative"}});
  }));

  server.Get("/v1/areas", guarded([&reg](const auto &req, auto &res) {
    std::optional<registry::BoundingBox> box;
    if (req.has_param("bbox"))
      box = registry::BoundingBox::parse(req.get_param_value("bbox"));
    json out = json::array();
    for (const auto &a : reg.area_counts(box))
      out.push_back(area_json(a));
    reply(res, 200, out);
  }));

  server.Post("/v1/users", guarded([&reg](const auto &req, auto &res) {
    const json body = parse_body(req);
    if (!body.is_object() || !body.contains("number") || !body["number"].is_string())
      throw Error(ErrorKind::Validation, "body needs a string 'number'");
    reply(res, 201, json{{"token", reg.register_user(body["number"].template get<std::string>())}});
  }));

  server.Get("/v1/status", guarded([&reg](const auto &req, auto &res) {
    const auto s = reg.status_check(token_of(req));
    if (!s.listed)
      reply(res, 200, json{{"status", "not_listed"}});
    else
      reply(res, 200,
            json{{"status", "listed"}, {"event_count", s.event_count}, {"flagged", s.flagged}});
  }));

  server.Get("/v1/questionnaire", guarded([](const auto &, auto &res) {
    json qs = json::array();
    for (const auto &q : triage::questionnaire_schema())
      qs.push_back(json{{"id", q.id}, {"text", q.text}});
    reply(res, 200, json{{"questions", qs}});
  }));

  server.Post("/v1/questionnaire", guarded([&reg](const auto &req, auto &res) {
    const auto token = token_of(req);
    reg.resolve_token(token);
    const auto answers = parse_answers(parse_body(req));
    const auto r = reg.submit_questionnaire(token, answers);
    reply(res, 200,
          json{{"recommendation", triage::to_string(r.recommendation)},
               {"yes_count", r.yes_count},
               {"rule_fired", r.rule_fired}});
  }));

  server.set_error_handler([](const httplib::Request &, httplib::Response &res) {
    if (res.body.empty())
      reply_error(res, res.status, res.status == 404 ? "not_found" : "http_error",
                  "no such endpoint");
  });
}

ApiServer::ApiServer(registry::Registry &registry)
    : server_(std::make_unique<httplib::Server>()) {
  // httplib's default sets SO_REUSEPORT, which would let a second server
  // share a port silently.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  mount_routes(*server_, registry);
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string &host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0)
    throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port) +
                                   " (port in use?)");
  return bound;
}

void ApiServer::listen() { server_->listen_after_bind(); }

void ApiServer::stop() {
  if (server_)
    server_->stop();
}

} // namespace ctrace::service
