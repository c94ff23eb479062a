fn main() {
    std::process::exit(gazegate::cli::run());
}
