fn main() {
    std::process::exit(rssbound::cli::run(std::env::args_os()));
}
