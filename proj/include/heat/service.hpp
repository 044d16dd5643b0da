#pragma once

#include <memory>
#include <string>

#include "heat/error.hpp"
#include "heat/workspace.hpp"

namespace httplib {
class Server;
}

namespace heat {

/// HTTP status for an error category.
int http_status(ErrorKind kind);

/// REST front end over one workspace. Responses are the same JSON views the
/// CLI prints with --json.
class Service {
 public:
  explicit Service(Workspace& workspace);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds without serving. Port 0 picks a free port; returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  bool serve();
  void stop();

 private:
  void routes();

  Workspace& ws_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace heat
