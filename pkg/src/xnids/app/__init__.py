"""CLI orchestration, report generation, SVG rendering, and the HTTP API."""
