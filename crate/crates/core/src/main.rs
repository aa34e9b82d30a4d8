fn main() {
    std::process::exit(entail_rank::cli::main());
}
