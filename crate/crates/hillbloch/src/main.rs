//! Thin entry point: all logic lives in [`hillbloch::cli`].

fn main() {
    std::process::exit(hillbloch::cli::run());
}
