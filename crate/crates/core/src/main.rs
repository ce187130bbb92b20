fn main() {
    let code = titlemeta::cli::run(std::env::args_os());
    std::process::exit(code);
}
