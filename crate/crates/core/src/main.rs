fn main() {
    std::process::exit(outlier_embed::cli::run(std::env::args_os()));
}
