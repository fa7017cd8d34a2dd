"""HTTP service wrapping tuning sessions.

Sessions run in background threads on the server; benchmark commands are
serialized by a global measurement lock so two sessions never contend
for the machine at once. Clients submit a config, poll status, and fetch
the finished report, which is the same JSON document the CLI writes.
"""
