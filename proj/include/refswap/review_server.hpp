#pragma once

#include "httplib.h"
#include "refswap/review.hpp"

namespace refswap {

/// Registers the review API and static routes on an existing server. The
/// store must outlive the server.
void install_review_routes(httplib::Server& server, ReviewStore& store,
                           const ReviewServerOptions& options);

}  // namespace refswap
